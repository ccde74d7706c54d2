//! Syntax-aware indexing of the subject crate: functions, raw-pointer
//! declarations, and the struct/static context needed to build prompts.
//!
//! Indexing operates on surface syntax only. Line numbers are 1-based
//! throughout to match compiler diagnostics, and every extracted text is a
//! byte-exact slice of the file it came from so that rewrites can be patched
//! back without drift.

use proc_macro2::LineColumn;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use syn::spanned::Spanned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no source files found under {0}")]
    NoSources(PathBuf),
}

/// One function as it appears in one source file. `source_text` is the exact
/// content of the file between `start_line` and `end_line`, so replacing that
/// line span with `source_text` leaves the file byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub file_path: PathBuf,
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub source_text: String,
    pub signature_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointerMutability {
    Const,
    Mut,
}

impl fmt::Display for PointerMutability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointerMutability::Const => write!(f, "*const"),
            PointerMutability::Mut => write!(f, "*mut"),
        }
    }
}

/// One raw-pointer declaration (local or parameter) in one function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPointerSite {
    pub function: FunctionRecord,
    pub name: String,
    pub decl_line: usize,
    pub decl_text: String,
    pub pointee_type: String,
    pub mutability: PointerMutability,
    pub pointer_depth: usize,
    pub is_void_pointee: bool,
    pub is_parameter: bool,
}

/// Struct definitions and static declarations referenced by a function,
/// extracted verbatim for prompt construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptContext {
    pub struct_definitions: Vec<String>,
    pub static_declarations: Vec<String>,
}

/// A named crate-level item (struct or static) with its exact source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedItem {
    pub name: String,
    pub file_path: PathBuf,
    pub line: usize,
    pub text: String,
}

/// A pointer-typed declaration we refuse to enumerate as a standard site
/// (destructuring patterns and similar forms without a single declared name).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedDecl {
    pub file_path: PathBuf,
    pub function_name: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SourceFile {
    pub rel_path: PathBuf,
    pub content: String,
}

/// Read-only index over a crate's source tree.
#[derive(Debug, Clone, Default)]
pub struct CrateIndex {
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
    pub functions: Vec<FunctionRecord>,
    pub structs: Vec<NamedItem>,
    pub statics: Vec<NamedItem>,
    pub skipped_decls: Vec<SkippedDecl>,
}

/// Maps 1-based line / char-column positions (as reported by the parser) to
/// byte offsets in the original text.
pub(crate) struct LineMap {
    starts: Vec<usize>,
    len: usize,
}

impl LineMap {
    pub(crate) fn new(text: &str) -> Self {
        let mut starts = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        LineMap {
            starts,
            len: text.len(),
        }
    }

    pub(crate) fn line_count(&self) -> usize {
        self.starts.len()
    }

    fn line_start(&self, line: usize) -> usize {
        self.starts[line - 1]
    }

    /// Byte offset just past the content of `line`, excluding its newline.
    fn line_end(&self, text: &str, line: usize) -> usize {
        if line < self.starts.len() {
            self.starts[line] - 1
        } else {
            text.len()
        }
    }

    pub(crate) fn offset(&self, text: &str, lc: LineColumn) -> usize {
        let start = self.line_start(lc.line.min(self.starts.len()));
        for (chars, (i, ch)) in text[start..].char_indices().enumerate() {
            if chars == lc.column || ch == '\n' {
                return start + i;
            }
        }
        self.len
    }

    /// Byte range covering full lines `start_line..=end_line`, newline of the
    /// last line excluded.
    pub(crate) fn line_span(&self, text: &str, start_line: usize, end_line: usize) -> (usize, usize) {
        (self.line_start(start_line), self.line_end(text, end_line))
    }
}

/// Exact text of lines `start_line..=end_line` of `text`.
pub(crate) fn slice_lines(text: &str, map: &LineMap, start_line: usize, end_line: usize) -> String {
    let (a, b) = map.line_span(text, start_line, end_line);
    text[a..b].to_string()
}

struct ParsedFn {
    sig: syn::Signature,
    block: syn::Block,
}

fn first_token_start(vis: &Option<syn::Visibility>, sig: &syn::Signature) -> LineColumn {
    if let Some(v) = vis {
        if !matches!(v, syn::Visibility::Inherited) {
            return v.span().start();
        }
    }
    if let Some(c) = &sig.constness {
        return c.span.start();
    }
    if let Some(a) = &sig.asyncness {
        return a.span.start();
    }
    if let Some(u) = &sig.unsafety {
        return u.span.start();
    }
    if let Some(abi) = &sig.abi {
        return abi.extern_token.span.start();
    }
    sig.fn_token.span.start()
}

fn signature_end(sig: &syn::Signature) -> LineColumn {
    let mut end = sig.paren_token.span.close().end();
    if let syn::ReturnType::Type(_, ty) = &sig.output {
        end = max_lc(end, ty.span().end());
    }
    if let Some(wc) = &sig.generics.where_clause {
        end = max_lc(end, wc.span().end());
    }
    end
}

fn max_lc(a: LineColumn, b: LineColumn) -> LineColumn {
    if (b.line, b.column) > (a.line, a.column) {
        b
    } else {
        a
    }
}

fn record_from_parts(
    rel_path: &Path,
    content: &str,
    map: &LineMap,
    vis: &Option<syn::Visibility>,
    sig: &syn::Signature,
    block: &syn::Block,
) -> FunctionRecord {
    let start = first_token_start(vis, sig);
    let end = block.brace_token.span.close().end();
    let sig_start = sig.fn_token.span.start();
    let sig_end = signature_end(sig);
    let sig_range = (map.offset(content, sig_start), map.offset(content, sig_end));
    FunctionRecord {
        file_path: rel_path.to_path_buf(),
        name: sig.ident.to_string(),
        start_line: start.line,
        end_line: end.line,
        source_text: slice_lines(content, map, start.line, end.line),
        signature_text: content[sig_range.0..sig_range.1].to_string(),
    }
}

fn item_start_with_attrs(attrs: &[syn::Attribute], fallback: LineColumn) -> LineColumn {
    attrs
        .first()
        .map(|a| a.pound_token.span.start())
        .unwrap_or(fallback)
}

struct FileVisit<'a> {
    rel_path: &'a Path,
    content: &'a str,
    map: &'a LineMap,
    functions: Vec<FunctionRecord>,
    structs: Vec<NamedItem>,
    statics: Vec<NamedItem>,
    skipped: Vec<SkippedDecl>,
}

impl<'a> FileVisit<'a> {
    fn named_item(&self, name: String, attrs: &[syn::Attribute], start: LineColumn, end: LineColumn) -> NamedItem {
        let start = item_start_with_attrs(attrs, start);
        NamedItem {
            name,
            file_path: self.rel_path.to_path_buf(),
            line: start.line,
            text: slice_lines(self.content, self.map, start.line, end.line),
        }
    }

    fn visit_items(&mut self, items: &[syn::Item]) {
        for item in items {
            match item {
                syn::Item::Fn(f) => {
                    let record = record_from_parts(
                        self.rel_path,
                        self.content,
                        self.map,
                        &Some(f.vis.clone()),
                        &f.sig,
                        &f.block,
                    );
                    self.collect_sites(&record);
                    self.functions.push(record);
                }
                syn::Item::Impl(imp) => {
                    for ii in &imp.items {
                        if let syn::ImplItem::Fn(m) = ii {
                            let record = record_from_parts(
                                self.rel_path,
                                self.content,
                                self.map,
                                &Some(m.vis.clone()),
                                &m.sig,
                                &m.block,
                            );
                            self.collect_sites(&record);
                            self.functions.push(record);
                        }
                    }
                }
                syn::Item::Mod(m) => {
                    if let Some((_, items)) = &m.content {
                        self.visit_items(items);
                    }
                }
                syn::Item::Struct(s) => {
                    let item = self.named_item(
                        s.ident.to_string(),
                        &s.attrs,
                        s.span().start(),
                        s.span().end(),
                    );
                    self.structs.push(item);
                }
                syn::Item::Union(u) => {
                    let item = self.named_item(
                        u.ident.to_string(),
                        &u.attrs,
                        u.span().start(),
                        u.span().end(),
                    );
                    self.structs.push(item);
                }
                syn::Item::Static(st) => {
                    let item = self.named_item(
                        st.ident.to_string(),
                        &st.attrs,
                        st.span().start(),
                        st.span().end(),
                    );
                    self.statics.push(item);
                }
                _ => {}
            }
        }
    }

    fn collect_sites(&mut self, record: &FunctionRecord) {
        // Site extraction happens again in enumerate_raw_pointers; here we
        // only need the skipped-form diagnostics, which are not recoverable
        // from the record alone.
        if let Ok(extraction) = extract_sites(record) {
            for skip in extraction.skipped {
                self.skipped.push(skip);
            }
        }
    }
}

/// Index every source file under `crate_root`. The root must follow the
/// standard layout (a `Cargo.toml` manifest next to a `src` directory); files
/// are indexed in path order.
pub fn index_crate(crate_root: &Path) -> Result<CrateIndex, IndexError> {
    let src_root = crate_root.join("src");
    let scan_root = if src_root.is_dir() { src_root } else { crate_root.to_path_buf() };
    let mut paths: Vec<PathBuf> = walkdir::WalkDir::new(&scan_root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| x == "rs"))
        .filter(|p| !p.components().any(|c| c.as_os_str() == "target"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(IndexError::NoSources(crate_root.to_path_buf()));
    }

    let mut index = CrateIndex {
        root: crate_root.to_path_buf(),
        ..Default::default()
    };
    for path in paths {
        let rel = path.strip_prefix(crate_root).unwrap_or(&path).to_path_buf();
        let content = std::fs::read_to_string(&path).map_err(|source| IndexError::Io {
            path: path.clone(),
            source,
        })?;
        let file_index = index_source(&rel, &content)?;
        index.functions.extend(file_index.functions);
        index.structs.extend(file_index.structs);
        index.statics.extend(file_index.statics);
        index.skipped_decls.extend(file_index.skipped);
        index.files.push(SourceFile {
            rel_path: rel,
            content,
        });
    }
    Ok(index)
}

/// Per-file index result.
#[derive(Debug)]
pub struct FileIndex {
    pub functions: Vec<FunctionRecord>,
    pub structs: Vec<NamedItem>,
    pub statics: Vec<NamedItem>,
    pub skipped: Vec<SkippedDecl>,
}

/// Parse one source file and extract its functions and crate-level items.
pub fn index_source(rel_path: &Path, content: &str) -> Result<FileIndex, IndexError> {
    let file: syn::File = syn::parse_str(content).map_err(|e| IndexError::Parse {
        path: rel_path.to_path_buf(),
        line: e.span().start().line.max(1),
        message: e.to_string(),
    })?;
    let map = LineMap::new(content);
    let mut visit = FileVisit {
        rel_path,
        content,
        map: &map,
        functions: Vec::new(),
        structs: Vec::new(),
        statics: Vec::new(),
        skipped: Vec::new(),
    };
    visit.visit_items(&file.items);
    Ok(FileIndex {
        functions: visit.functions,
        structs: visit.structs,
        statics: visit.statics,
        skipped: visit.skipped,
    })
}

fn parse_standalone_fn(record: &FunctionRecord) -> Result<(ParsedFn, usize), IndexError> {
    match syn::parse_str::<syn::ItemFn>(&record.source_text) {
        Ok(f) => Ok((
            ParsedFn {
                sig: f.sig,
                block: *f.block,
            },
            0,
        )),
        Err(first_err) => {
            // Methods with receivers do not parse as free items; retry inside
            // a synthetic impl block (shifts local lines by one).
            let wrapped = format!("impl __PtrliftWrap {{\n{}\n}}", record.source_text);
            let imp: syn::ItemImpl = syn::parse_str(&wrapped).map_err(|_| IndexError::Parse {
                path: record.file_path.clone(),
                line: record.start_line + first_err.span().start().line.saturating_sub(1),
                message: first_err.to_string(),
            })?;
            for item in imp.items {
                if let syn::ImplItem::Fn(m) = item {
                    return Ok((
                        ParsedFn {
                            sig: m.sig,
                            block: m.block,
                        },
                        1,
                    ));
                }
            }
            Err(IndexError::Parse {
                path: record.file_path.clone(),
                line: record.start_line,
                message: "expected a function definition".to_string(),
            })
        }
    }
}

struct PointerShape {
    depth: usize,
    mutability: PointerMutability,
    pointee_span: (LineColumn, LineColumn),
    is_void: bool,
}

fn strip_type_wrappers(ty: &syn::Type) -> &syn::Type {
    match ty {
        syn::Type::Paren(p) => strip_type_wrappers(&p.elem),
        syn::Type::Group(g) => strip_type_wrappers(&g.elem),
        _ => ty,
    }
}

fn pointer_shape(ty: &syn::Type) -> Option<PointerShape> {
    let ty = strip_type_wrappers(ty);
    let syn::Type::Ptr(ptr) = ty else { return None };
    let mutability = if ptr.mutability.is_some() {
        PointerMutability::Mut
    } else {
        PointerMutability::Const
    };
    let mut depth = 1;
    let mut inner = strip_type_wrappers(&ptr.elem);
    while let syn::Type::Ptr(p) = inner {
        depth += 1;
        inner = strip_type_wrappers(&p.elem);
    }
    let is_void = match inner {
        syn::Type::Path(tp) => tp
            .path
            .segments
            .last()
            .is_some_and(|seg| seg.ident == "c_void"),
        _ => false,
    };
    Some(PointerShape {
        depth,
        mutability,
        pointee_span: (inner.span().start(), inner.span().end()),
        is_void,
    })
}

struct SiteExtraction {
    sites: Vec<RawPointerSite>,
    skipped: Vec<SkippedDecl>,
}

struct LocalVisitor<'a> {
    record: &'a FunctionRecord,
    map: &'a LineMap,
    line_offset: usize,
    sites: Vec<RawPointerSite>,
    skipped: Vec<SkippedDecl>,
}

impl<'a> LocalVisitor<'a> {
    fn file_line(&self, local_line: usize) -> usize {
        self.record.start_line + local_line.saturating_sub(self.line_offset) - 1
    }

    fn local_slice(&self, start: LineColumn, end: LineColumn) -> String {
        let text = &self.record.source_text;
        let a = self
            .map
            .offset(text, adjust_lc(start, self.line_offset));
        let b = self.map.offset(text, adjust_lc(end, self.line_offset));
        text[a..b].to_string()
    }
}

fn adjust_lc(lc: LineColumn, line_offset: usize) -> LineColumn {
    LineColumn {
        line: lc.line - line_offset,
        column: lc.column,
    }
}

impl<'ast, 'a> syn::visit::Visit<'ast> for LocalVisitor<'a> {
    fn visit_local(&mut self, local: &'ast syn::Local) {
        if let syn::Pat::Type(pt) = &local.pat {
            if let Some(shape) = pointer_shape(&pt.ty) {
                match &*pt.pat {
                    syn::Pat::Ident(pi) => {
                        let start = local.let_token.span.start();
                        let end = local.semi_token.span.end();
                        self.sites.push(RawPointerSite {
                            function: self.record.clone(),
                            name: pi.ident.to_string(),
                            decl_line: self.file_line(start.line),
                            decl_text: self.local_slice(start, end),
                            pointee_type: self.local_slice(shape.pointee_span.0, shape.pointee_span.1),
                            mutability: shape.mutability,
                            pointer_depth: shape.depth,
                            is_void_pointee: shape.is_void,
                            is_parameter: false,
                        });
                    }
                    _ => {
                        self.skipped.push(SkippedDecl {
                            file_path: self.record.file_path.clone(),
                            function_name: self.record.name.clone(),
                            line: self.file_line(local.let_token.span.start().line),
                            reason: "unsupported declaration form".to_string(),
                        });
                    }
                }
            } else if type_mentions_ptr(&pt.ty) && !matches!(&*pt.pat, syn::Pat::Ident(_)) {
                // e.g. `let (a, b): (*mut T, i32) = ...`
                self.skipped.push(SkippedDecl {
                    file_path: self.record.file_path.clone(),
                    function_name: self.record.name.clone(),
                    line: self.file_line(local.let_token.span.start().line),
                    reason: "unsupported declaration form".to_string(),
                });
            }
        }
        syn::visit::visit_local(self, local);
    }
}

fn type_mentions_ptr(ty: &syn::Type) -> bool {
    match strip_type_wrappers(ty) {
        syn::Type::Ptr(_) => true,
        syn::Type::Tuple(t) => t.elems.iter().any(type_mentions_ptr),
        syn::Type::Array(a) => type_mentions_ptr(&a.elem),
        _ => false,
    }
}

fn extract_sites(record: &FunctionRecord) -> Result<SiteExtraction, IndexError> {
    let (parsed, line_offset) = parse_standalone_fn(record)?;
    let map = LineMap::new(&record.source_text);
    let mut visitor = LocalVisitor {
        record,
        map: &map,
        line_offset,
        sites: Vec::new(),
        skipped: Vec::new(),
    };

    for input in &parsed.sig.inputs {
        if let syn::FnArg::Typed(pt) = input {
            if let Some(shape) = pointer_shape(&pt.ty) {
                match &*pt.pat {
                    syn::Pat::Ident(pi) => {
                        let start = pt.span().start();
                        let end = pt.span().end();
                        let site = RawPointerSite {
                            function: record.clone(),
                            name: pi.ident.to_string(),
                            decl_line: visitor.file_line(start.line),
                            decl_text: visitor.local_slice(start, end),
                            pointee_type: visitor.local_slice(shape.pointee_span.0, shape.pointee_span.1),
                            mutability: shape.mutability,
                            pointer_depth: shape.depth,
                            is_void_pointee: shape.is_void,
                            is_parameter: true,
                        };
                        visitor.sites.push(site);
                    }
                    _ => visitor.skipped.push(SkippedDecl {
                        file_path: record.file_path.clone(),
                        function_name: record.name.clone(),
                        line: visitor.file_line(pt.span().start().line),
                        reason: "unsupported declaration form".to_string(),
                    }),
                }
            }
        }
    }

    syn::visit::Visit::visit_block(&mut visitor, &parsed.block);

    let mut sites = visitor.sites;
    sites.sort_by_key(|s| s.decl_line);
    Ok(SiteExtraction {
        sites,
        skipped: visitor.skipped,
    })
}

/// Enumerate raw-pointer-typed locals and parameters of one function, ordered
/// by declaration line. Only declarations with an explicit pointer type
/// annotation are considered; macro-generated code is not expanded.
pub fn enumerate_raw_pointers(record: &FunctionRecord) -> Result<Vec<RawPointerSite>, IndexError> {
    Ok(extract_sites(record)?.sites)
}

/// A site can be lifted only when it is a depth-one, non-void local.
pub fn is_eligible(site: &RawPointerSite) -> bool {
    !(site.is_void_pointee || site.pointer_depth > 1 || site.is_parameter)
}

/// Human-readable reason a site is excluded, mirroring the eligibility rule.
pub fn ineligibility_reason(site: &RawPointerSite) -> Option<String> {
    if site.is_void_pointee {
        Some("void pointee".to_string())
    } else if site.pointer_depth > 1 {
        Some(format!("pointer depth {}", site.pointer_depth))
    } else if site.is_parameter {
        Some("function parameter".to_string())
    } else {
        None
    }
}

/// Collect the struct definitions and static declarations whose names occur
/// as identifiers in the function text, in declaration order, deduplicated.
pub fn collect_context(record: &FunctionRecord, index: &CrateIndex) -> PromptContext {
    let idents = identifier_set(&record.source_text);
    let mut ctx = PromptContext::default();
    let mut seen = BTreeSet::new();
    for item in &index.structs {
        if idents.contains(item.name.as_str()) && seen.insert(("s", item.name.clone())) {
            ctx.struct_definitions.push(item.text.clone());
        }
    }
    for item in &index.statics {
        if idents.contains(item.name.as_str()) && seen.insert(("g", item.name.clone())) {
            ctx.static_declarations.push(item.text.clone());
        }
    }
    ctx
}

fn identifier_set(text: &str) -> BTreeSet<&str> {
    let mut set = BTreeSet::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() {
                let c = bytes[i] as char;
                if c.is_ascii_alphanumeric() || c == '_' {
                    i += 1;
                } else {
                    break;
                }
            }
            set.insert(&text[start..i]);
        } else {
            i += 1;
        }
    }
    set
}

/// Find a function by name in a freshly indexed file, selecting the `occurrence`-th
/// match (0-based) to disambiguate same-named functions in different modules.
pub fn find_function<'a>(
    functions: &'a [FunctionRecord],
    file: &Path,
    name: &str,
    occurrence: usize,
) -> Option<&'a FunctionRecord> {
    functions
        .iter()
        .filter(|f| f.file_path == file && f.name == name)
        .nth(occurrence)
}
