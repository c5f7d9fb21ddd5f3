//! Repository access through the system `git` client.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use super::{CommitRecord, MineError};

pub struct GitRepo {
    path: PathBuf,
}

impl GitRepo {
    pub fn open(path: &Path) -> Result<GitRepo, MineError> {
        let repo = GitRepo { path: path.to_path_buf() };
        match repo.git(&["rev-parse", "--git-dir"]) {
            Ok(_) => Ok(repo),
            Err(detail) => Err(MineError::RepoUnreadable { path: path.to_path_buf(), detail }),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new("git");
        cmd.arg("-C").arg(&self.path).args(["-c", "core.quotepath=off"]);
        cmd
    }

    fn git(&self, args: &[&str]) -> Result<String, String> {
        let out = self.command().args(args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).trim().to_string());
        }
        String::from_utf8(out.stdout).map_err(|e| e.to_string())
    }

    /// Commit id the branch points at, or `None` for a repository without commits.
    pub fn resolve_branch(&self, branch: &str) -> Result<Option<String>, MineError> {
        let spec = format!("{branch}^{{commit}}");
        if let Ok(sha) = self.git(&["rev-parse", "--verify", "--quiet", &spec]) {
            return Ok(Some(sha.trim().to_string()));
        }
        let refs = self.git(&["for-each-ref", "--count=1"]).unwrap_or_default();
        if refs.trim().is_empty() {
            return Ok(None);
        }
        Err(MineError::BranchMissing { path: self.path.clone(), branch: branch.to_string() })
    }

    /// First-parent chain of `branch`, oldest first, each commit diffed
    /// against its first parent (root commits against the empty tree).
    pub fn stream_commits(&self, branch: &str, repo_id: &str) -> Result<Vec<CommitRecord>, MineError> {
        let Some(tip) = self.resolve_branch(branch)? else {
            return Ok(Vec::new());
        };
        let out = self
            .git(&[
                "log",
                "--first-parent",
                "--reverse",
                "--diff-merges=first-parent",
                "--no-renames",
                "--numstat",
                "--format=%x1e%H%x1f%P%x1f%an%x1f%ae%x1f%at",
                &tip,
                "--",
            ])
            .map_err(|detail| MineError::RepoUnreadable { path: self.path.clone(), detail })?;
        out.split('\x1e').filter(|r| !r.trim().is_empty()).map(|r| parse_record(r, repo_id)).collect()
    }

    pub fn blobs(&self) -> Result<BlobReader, MineError> {
        BlobReader::spawn(self.command())
            .map_err(|e| MineError::RepoUnreadable { path: self.path.clone(), detail: e.to_string() })
    }
}

fn parse_record(record: &str, repo_id: &str) -> Result<CommitRecord, MineError> {
    let mut lines = record.lines();
    let header = lines.next().unwrap_or_default();
    let fields: Vec<&str> = header.split('\x1f').collect();
    let malformed = || MineError::Malformed(header.to_string());
    if fields.len() != 5 {
        return Err(malformed());
    }
    let timestamp: i64 = fields[4].trim().parse().map_err(|_| malformed())?;
    let mut changed_java_files = Vec::new();
    let mut files_changed_count = 0usize;
    let mut java_lines_added = 0u64;
    for line in lines {
        let mut parts = line.splitn(3, '\t');
        let (Some(added), Some(_deleted), Some(path)) = (parts.next(), parts.next(), parts.next()) else {
            continue;
        };
        let path = unquote(path);
        files_changed_count += 1;
        if path.ends_with(".java") {
            java_lines_added += added.parse::<u64>().unwrap_or(0);
            changed_java_files.push(path);
        }
    }
    Ok(CommitRecord {
        repo_id: repo_id.to_string(),
        sha: fields[0].to_string(),
        author_name: fields[2].to_string(),
        author_email: fields[3].to_string(),
        timestamp,
        first_parent_sha: fields[1].split_whitespace().next().map(str::to_string),
        changed_java_files,
        files_changed_count,
        java_lines_added,
    })
}

/// Undoes git's C-style path quoting.
fn unquote(path: &str) -> String {
    let Some(inner) = path.strip_prefix('"').and_then(|p| p.strip_suffix('"')) else {
        return path.to_string();
    };
    let mut bytes = Vec::with_capacity(inner.len());
    let mut it = inner.bytes().peekable();
    while let Some(b) = it.next() {
        if b != b'\\' {
            bytes.push(b);
            continue;
        }
        match it.next() {
            Some(b'n') => bytes.push(b'\n'),
            Some(b't') => bytes.push(b'\t'),
            Some(d @ b'0'..=b'7') => {
                let mut v = (d - b'0') as u32;
                for _ in 0..2 {
                    if let Some(&n @ b'0'..=b'7') = it.peek() {
                        v = v * 8 + (n - b'0') as u32;
                        it.next();
                    }
                }
                bytes.push(v as u8);
            }
            Some(other) => bytes.push(other),
            None => {}
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

/// Long-lived `git cat-file --batch` process.
pub struct BlobReader {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl BlobReader {
    fn spawn(mut cmd: Command) -> std::io::Result<BlobReader> {
        let mut child = cmd
            .args(["cat-file", "--batch"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(BlobReader { child, stdin, stdout })
    }

    /// Content of `path` at `rev`, or `None` when it does not exist there.
    pub fn read(&mut self, rev: &str, path: &str) -> std::io::Result<Option<Vec<u8>>> {
        writeln!(self.stdin, "{rev}:{path}")?;
        self.stdin.flush()?;
        let mut header = String::new();
        self.stdout.read_line(&mut header)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[1] != "blob" {
            return Ok(None);
        }
        let size: usize = fields[2]
            .parse()
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidData, header.clone()))?;
        let mut buf = vec![0u8; size + 1];
        self.stdout.read_exact(&mut buf)?;
        buf.truncate(size);
        Ok(Some(buf))
    }
}

impl Drop for BlobReader {
    fn drop(&mut self) {
        let _ = self.stdin.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
