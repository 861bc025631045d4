//! Adapter for external codec binaries.
//!
//! A [`CodecProfile`] describes how to invoke an encoder and decoder pair
//! through argv templates. Commands run directly, without a shell, inside a
//! scratch directory with a cleared environment (PATH only). Streams move
//! through planar YUV files; the coded size is the byte length of whatever
//! the encoder wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::video::{read_yuv, write_yuv, VideoError, VideoSequence};

/// Upper bound on one encoder or decoder invocation.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3600);

const PLACEHOLDERS: [&str; 6] = ["input", "output", "width", "height", "frames", "qp"];

#[derive(Debug, Error)]
pub enum AdapterError {
    /// The profile itself is malformed.
    #[error("profile error: {0}")]
    Profile(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to launch {program}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage} command {program} exited with {status}: {detail}")]
    CommandFailed {
        stage: &'static str,
        program: String,
        status: String,
        detail: String,
    },
    #[error("{stage} command {program} timed out after {secs} s")]
    Timeout {
        stage: &'static str,
        program: String,
        secs: u64,
    },
    /// The external pair ran but its output does not add up.
    #[error("external codec output error: {0}")]
    Output(String),
    #[error(transparent)]
    Video(#[from] VideoError),
}

/// Argv template. Accepts either one whitespace-separated line or an
/// explicit token array in JSON; placeholders expand inside tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "TemplateRepr")]
pub struct Template(pub Vec<String>);

#[derive(Deserialize)]
#[serde(untagged)]
enum TemplateRepr {
    Line(String),
    Argv(Vec<String>),
}

impl From<TemplateRepr> for Template {
    fn from(repr: TemplateRepr) -> Self {
        match repr {
            TemplateRepr::Line(s) => Template(s.split_whitespace().map(str::to_owned).collect()),
            TemplateRepr::Argv(v) => Template(v),
        }
    }
}

impl Template {
    fn mentions(&self, name: &str) -> bool {
        let needle = format!("{{{name}}}");
        self.0.iter().any(|t| t.contains(&needle))
    }

    fn expand(&self, vars: &[(&str, String)]) -> Result<Vec<String>, AdapterError> {
        self.0.iter().map(|t| expand_token(t, vars)).collect()
    }
}

fn expand_token(token: &str, vars: &[(&str, String)]) -> Result<String, AdapterError> {
    let mut out = String::new();
    let mut rest = token;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let end = after.find('}').ok_or_else(|| {
            AdapterError::Profile(format!("unterminated placeholder in `{token}`"))
        })?;
        let name = &after[..end];
        let (_, value) = vars.iter().find(|(k, _)| *k == name).ok_or_else(|| {
            AdapterError::Profile(format!("unknown placeholder {{{name}}} in `{token}`"))
        })?;
        out.push_str(value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// External encoder/decoder pair.
///
/// The encode template must reference `{input}`, `{output}` and `{qp}`; the
/// decode template `{input}` and `{output}`. `{width}`, `{height}` and
/// `{frames}` are available to both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecProfile {
    pub name: String,
    pub encode: Template,
    pub decode: Template,
}

impl CodecProfile {
    pub fn from_json(text: &str) -> Result<Self, AdapterError> {
        let profile: CodecProfile =
            serde_json::from_str(text).map_err(|e| AdapterError::Profile(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    /// Checks the templates before anything is executed.
    pub fn validate(&self) -> Result<(), AdapterError> {
        if self.name.trim().is_empty() {
            return Err(AdapterError::Profile("profile name is empty".into()));
        }
        for (stage, template, required) in [
            ("encode", &self.encode, &["input", "output", "qp"][..]),
            ("decode", &self.decode, &["input", "output"][..]),
        ] {
            if template.0.is_empty() {
                return Err(AdapterError::Profile(format!("{stage} template is empty")));
            }
            for name in required {
                if !template.mentions(name) {
                    return Err(AdapterError::Profile(format!(
                        "{stage} template never uses {{{name}}}"
                    )));
                }
            }
            // Surface typos before the first run, not during it.
            let dummy: Vec<(&str, String)> =
                PLACEHOLDERS.iter().map(|&p| (p, String::new())).collect();
            template.expand(&dummy)?;
        }
        Ok(())
    }
}

/// Result of one external encode/decode cycle.
#[derive(Debug, Clone)]
pub struct CodedOutcome {
    pub decoded: VideoSequence,
    /// Eight times the coded file length.
    pub size_bits: u64,
}

/// Runs the profile on a sequence at one qp and reads the decoded result
/// back at the source geometry and format.
pub fn run_profile(
    profile: &CodecProfile,
    seq: &VideoSequence,
    qp: i32,
    timeout: Duration,
) -> Result<CodedOutcome, AdapterError> {
    profile.validate()?;
    if seq.is_empty() {
        return Err(AdapterError::Output("input sequence is empty".into()));
    }
    let dir = tempfile::tempdir().map_err(|e| AdapterError::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let input = dir.path().join("input.yuv");
    let coded = dir.path().join("coded.bin");
    let decoded_path = dir.path().join("decoded.yuv");
    write_yuv(seq, &input)?;

    let common = |inp: &Path, outp: &Path| -> Vec<(&'static str, String)> {
        vec![
            ("input", inp.display().to_string()),
            ("output", outp.display().to_string()),
            ("width", seq.width().to_string()),
            ("height", seq.height().to_string()),
            ("frames", seq.num_frames().to_string()),
            ("qp", qp.to_string()),
        ]
    };

    let argv = profile.encode.expand(&common(&input, &coded))?;
    run_command("encode", &argv, dir.path(), timeout)?;
    let coded_len = fs::metadata(&coded)
        .map_err(|e| AdapterError::Io {
            path: coded.clone(),
            source: e,
        })?
        .len();
    if coded_len == 0 {
        return Err(AdapterError::Output(format!(
            "encoder `{}` wrote an empty file",
            profile.name
        )));
    }

    let argv = profile.decode.expand(&common(&coded, &decoded_path))?;
    run_command("decode", &argv, dir.path(), timeout)?;
    let decoded = read_yuv(
        &decoded_path,
        seq.width(),
        seq.height(),
        seq.format(),
        Some(seq.num_frames()),
    )?;
    if decoded.num_frames() != seq.num_frames() {
        return Err(AdapterError::Output(format!(
            "decoder produced {} frames, expected {}",
            decoded.num_frames(),
            seq.num_frames()
        )));
    }
    Ok(CodedOutcome {
        decoded,
        size_bits: coded_len * 8,
    })
}

fn run_command(
    stage: &'static str,
    argv: &[String],
    dir: &Path,
    timeout: Duration,
) -> Result<(), AdapterError> {
    let program = argv[0].clone();
    let stdout_path = dir.join(format!("{stage}_stdout.log"));
    let stderr_path = dir.join(format!("{stage}_stderr.log"));
    let stdout = fs::File::create(&stdout_path).map_err(|e| AdapterError::Io {
        path: stdout_path.clone(),
        source: e,
    })?;
    let stderr = fs::File::create(&stderr_path).map_err(|e| AdapterError::Io {
        path: stderr_path.clone(),
        source: e,
    })?;
    let path_var =
        std::env::var_os("PATH").unwrap_or_else(|| "/usr/local/bin:/usr/bin:/bin".into());

    let mut child = Command::new(&program)
        .args(&argv[1..])
        .current_dir(dir)
        .env_clear()
        .env("PATH", path_var)
        .stdin(Stdio::null())
        .stdout(Stdio::from(stdout))
        .stderr(Stdio::from(stderr))
        .spawn()
        .map_err(|e| AdapterError::Spawn {
            program: program.clone(),
            source: e,
        })?;

    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if started.elapsed() > timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(AdapterError::Timeout {
                        stage,
                        program,
                        secs: timeout.as_secs(),
                    });
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(AdapterError::Spawn { program, source: e }),
        }
    };

    if !status.success() {
        let mut detail = tail_of(&stderr_path);
        if detail.is_empty() {
            detail = tail_of(&stdout_path);
        }
        if detail.is_empty() {
            detail = "(no output)".into();
        }
        return Err(AdapterError::CommandFailed {
            stage,
            program,
            status: status.to_string(),
            detail,
        });
    }
    Ok(())
}

fn tail_of(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap_or_default();
    let trimmed = text.trim();
    let cut = trimmed.len().saturating_sub(2000);
    let boundary = (cut..=trimmed.len())
        .find(|&i| trimmed.is_char_boundary(i))
        .unwrap_or(trimmed.len());
    trimmed[boundary..].to_string()
}
