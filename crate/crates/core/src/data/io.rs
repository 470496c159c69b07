use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_dialogue, Corpus, CorpusHeader, Dialogue, Provenance, Speaker, Split, Turn, TurnOrder};
use crate::error::{Error, Result};
use crate::features::{SemanticDialogueState, SlotSchema};

pub const CORPUS_FORMAT: &str = "tod-emotion-corpus";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    format: String,
    version: u32,
    schema: Vec<String>,
    #[serde(default)]
    turn_order: TurnOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

// Labels stay strings until validated so errors can name the offending value.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTurn {
    speaker: Speaker,
    text: String,
    #[serde(default)]
    emotion: Option<String>,
    #[serde(default)]
    satisfaction: Option<u8>,
    #[serde(default)]
    state: Option<SemanticDialogueState>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDialogue {
    id: String,
    #[serde(default)]
    domain: String,
    turns: Vec<RawTurn>,
    #[serde(default)]
    provenance: Option<Provenance>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_corpus(reader: impl BufRead) -> Result<Corpus> {
    let mut header: Option<CorpusHeader> = None;
    let mut dialogues = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match &header {
            None => header = Some(parse_header(&line, line_no)?),
            Some(h) => {
                let dialogue = parse_dialogue(&line, line_no)?;
                validate_dialogue(&dialogue, h).map_err(|e| locate(e, line_no))?;
                dialogues.push(dialogue);
            }
        }
    }
    let header = header.ok_or(Error::Parse {
        line: 1,
        message: "missing header record".into(),
    })?;
    Ok(Corpus { header, dialogues })
}

fn parse_header(line: &str, line_no: usize) -> Result<CorpusHeader> {
    let record: HeaderRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: format!("bad header record: {e}"),
    })?;
    if record.format != CORPUS_FORMAT {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected format `{CORPUS_FORMAT}`, got `{}`", record.format),
        });
    }
    if record.version != CORPUS_VERSION {
        return Err(Error::Parse {
            line: line_no,
            message: format!("unsupported corpus version {}", record.version),
        });
    }
    let schema = SlotSchema::new(record.schema).map_err(|e| locate(e, line_no))?;
    Ok(CorpusHeader {
        schema,
        turn_order: record.turn_order,
        split: record.split,
    })
}

fn parse_dialogue(line: &str, line_no: usize) -> Result<Dialogue> {
    let raw: RawDialogue = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    let turns = raw
        .turns
        .into_iter()
        .map(|t| {
            let emotion = t
                .emotion
                .map(|s| {
                    s.parse().map_err(|_| Error::BadLabel {
                        label: s.clone(),
                        line: Some(line_no),
                    })
                })
                .transpose()?;
            Ok(Turn {
                speaker: t.speaker,
                text: t.text,
                emotion,
                satisfaction: t.satisfaction,
                state: t.state,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dialogue {
        id: raw.id,
        domain: raw.domain,
        turns,
        provenance: raw.provenance,
    })
}

fn locate(e: Error, line_no: usize) -> Error {
    match e {
        Error::UnknownSlot { slot, .. } => Error::UnknownSlot {
            slot,
            line: Some(line_no),
        },
        Error::BadLabel { label, .. } => Error::BadLabel {
            label,
            line: Some(line_no),
        },
        Error::Parse { .. } => e,
        other => Error::Parse {
            line: line_no,
            message: other.to_string(),
        },
    }
}

pub fn write_corpus(corpus: &Corpus, mut out: impl Write) -> std::io::Result<()> {
    let header = HeaderRecord {
        format: CORPUS_FORMAT.into(),
        version: CORPUS_VERSION,
        schema: corpus.header.schema.slots().to_vec(),
        turn_order: corpus.header.turn_order,
        split: corpus.header.split,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for d in &corpus.dialogues {
        serde_json::to_writer(&mut out, d)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_corpus(corpus, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
