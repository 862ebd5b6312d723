//! Per-entity value vectors over the path list, and the boolean completeness matrix
//! derived from them.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Endpoint, QueryKind, ResultTable};
use crate::harvest::{EntityIndex, ENTITIES_FILE};
use crate::paths::{read_paths, write_paths, EnumerationConfig, PathPattern, PATHS_FILE};
use crate::term::{PrefixMap, Term, RDF_LANG_STRING, XSD_STRING};

pub const VECTORS_FILE: &str = "vectors.ndjson";
pub const MATRIX_FILE: &str = "matrix.bin";
pub const VECTORS_VERSION: u32 = 1;
pub const MATRIX_VERSION: u32 = 1;
const MATRIX_MAGIC: &[u8; 4] = b"MPCM";

/// Descriptors found at the end of one path for one entity.
///
/// Serialises as `[values, datatypes, languages]` where the last two are `null`
/// unless at least one value carries a datatype (resp. language tag); when present
/// they align positionally with `values`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "CellTuple", into = "CellTuple")]
pub struct CellValues {
    pub values: Vec<String>,
    pub datatypes: Option<Vec<Option<String>>>,
    pub languages: Option<Vec<Option<String>>>,
}

type CellTuple = (Vec<String>, Option<Vec<Option<String>>>, Option<Vec<Option<String>>>);

impl From<CellTuple> for CellValues {
    fn from((values, datatypes, languages): CellTuple) -> Self {
        CellValues { values, datatypes, languages }
    }
}

impl From<CellValues> for CellTuple {
    fn from(c: CellValues) -> Self {
        (c.values, c.datatypes, c.languages)
    }
}

impl CellValues {
    pub fn single(value: impl Into<String>) -> Self {
        CellValues { values: vec![value.into()], datatypes: None, languages: None }
    }

    fn push(&mut self, value: String, datatype: Option<String>, language: Option<String>) {
        let n = self.values.len();
        self.values.push(value);
        push_aligned(&mut self.datatypes, n, datatype);
        push_aligned(&mut self.languages, n, language);
    }

    pub fn datatype(&self, i: usize) -> Option<&str> {
        self.datatypes.as_ref().and_then(|d| d.get(i)).and_then(|d| d.as_deref())
    }

    pub fn language(&self, i: usize) -> Option<&str> {
        self.languages.as_ref().and_then(|d| d.get(i)).and_then(|d| d.as_deref())
    }

    fn is_consistent(&self) -> bool {
        let n = self.values.len();
        n >= 1
            && self.datatypes.as_ref().is_none_or(|d| d.len() == n)
            && self.languages.as_ref().is_none_or(|l| l.len() == n)
    }
}

fn push_aligned(list: &mut Option<Vec<Option<String>>>, existing: usize, item: Option<String>) {
    match (list.as_mut(), item) {
        (Some(l), item) => l.push(item),
        (None, Some(item)) => {
            let mut l = vec![None; existing];
            l.push(Some(item));
            *list = Some(l);
        }
        (None, None) => {}
    }
}

/// A vector cell: `None` is the absent marker.
pub type PathCell = Option<CellValues>;

#[derive(Clone, Debug, PartialEq)]
pub struct EntityVectorStore {
    pub entities: EntityIndex,
    pub paths: Vec<PathPattern>,
    cells: Vec<Vec<PathCell>>,
}

impl EntityVectorStore {
    pub fn new(entities: EntityIndex, paths: Vec<PathPattern>) -> Self {
        let cells = vec![vec![None; paths.len()]; entities.len()];
        EntityVectorStore { entities, paths, cells }
    }

    pub fn from_cells(entities: EntityIndex, paths: Vec<PathPattern>, cells: Vec<Vec<PathCell>>) -> Result<Self> {
        if cells.len() != entities.len() {
            return Err(Error::Integrity(format!("{} vectors for {} entities", cells.len(), entities.len())));
        }
        if let Some(bad) = cells.iter().position(|v| v.len() != paths.len()) {
            return Err(Error::Integrity(format!("vector of entity {bad} does not have {} cells", paths.len())));
        }
        Ok(EntityVectorStore { entities, paths, cells })
    }

    pub fn entity_count(&self) -> usize {
        self.cells.len()
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    pub fn vector(&self, entity: usize) -> &[PathCell] {
        &self.cells[entity]
    }

    pub fn cell(&self, entity: usize, path: usize) -> Option<&CellValues> {
        self.cells.get(entity).and_then(|v| v.get(path)).and_then(|c| c.as_ref())
    }

    pub fn set_cell(&mut self, entity: usize, path: usize, cell: PathCell) {
        self.cells[entity][path] = cell;
    }

    pub fn path(&self, index: usize) -> Result<&PathPattern> {
        self.paths.get(index).ok_or(Error::UnknownPath(index))
    }

    /// Path whose single predicate is `predicate`, e.g. the label path.
    pub fn find_path(&self, predicate: &str) -> Option<usize> {
        self.paths.iter().position(|p| p.predicates.len() == 1 && p.predicates[0] == predicate)
    }
}

/// Fills one vector per entity by fetching the terminal values of every path.
///
/// Entities missing from a path's results get the absent marker. A result reaching
/// the endpoint quota is re-fetched in entity batches small enough to fit.
pub fn build_vectors(
    entities: &EntityIndex,
    paths: &[PathPattern],
    scope: &EnumerationConfig,
    endpoint: &dyn Endpoint,
    prefixes: &PrefixMap,
) -> Result<EntityVectorStore> {
    let columns: Vec<Vec<PathCell>> = paths
        .par_iter()
        .map(|path| {
            let tables = fetch_terminal_values(path, entities, scope, endpoint)?;
            let mut column: Vec<PathCell> = vec![None; entities.len()];
            for table in tables {
                for row in table.rows {
                    accumulate(&mut column, row, entities, prefixes)?;
                }
            }
            Ok(column)
        })
        .collect::<Result<_>>()?;

    let mut store = EntityVectorStore::new(entities.clone(), paths.to_vec());
    for (p, column) in columns.into_iter().enumerate() {
        for (e, cell) in column.into_iter().enumerate() {
            store.cells[e][p] = cell;
        }
    }
    Ok(store)
}

fn fetch_terminal_values(
    path: &PathPattern,
    entities: &EntityIndex,
    scope: &EnumerationConfig,
    endpoint: &dyn Endpoint,
) -> Result<Vec<ResultTable>> {
    let quota = endpoint.quota();
    let base = scope.query(QueryKind::TerminalValuesForAllEntities).with_path(path.predicates.clone());
    let table = endpoint.execute(&base)?;
    if table.len() < quota {
        return Ok(vec![table]);
    }
    tracing::debug!(path = %path.label, "terminal values reached the quota; fetching in batches");
    let batch = (quota / 2).clamp(1, 500);
    let mut pending: Vec<Vec<String>> = entities.uris().chunks(batch).map(|c| c.to_vec()).collect();
    let mut tables = Vec::new();
    while let Some(chunk) = pending.pop() {
        let table = endpoint.execute(&base.clone().with_entities(chunk.clone()))?;
        if table.len() < quota {
            tables.push(table);
        } else if chunk.len() == 1 {
            return Err(Error::Integrity(format!(
                "entity <{}> has at least {quota} values at the end of {}",
                chunk[0], path.label
            )));
        } else {
            let (a, b) = chunk.split_at(chunk.len() / 2);
            pending.push(b.to_vec());
            pending.push(a.to_vec());
        }
    }
    Ok(tables)
}

fn accumulate(
    column: &mut [PathCell],
    row: Vec<Option<Term>>,
    entities: &EntityIndex,
    prefixes: &PrefixMap,
) -> Result<()> {
    let mut cells = row.into_iter();
    let entity = cells.next().flatten();
    let value = cells.next().flatten();
    let datatype = cells.next().flatten();
    let language = cells.next().flatten();

    let uri = match &entity {
        Some(Term::Iri { value }) => value,
        other => return Err(Error::Integrity(format!("terminal value row with entity {other:?}"))),
    };
    let id = entities.id(uri).ok_or_else(|| Error::Integrity(format!("result references unknown entity <{uri}>")))?;
    let Some(value) = value else { return Ok(()) };

    let datatype = datatype
        .and_then(|t| t.as_iri().map(String::from))
        .filter(|dt| dt != XSD_STRING && dt != RDF_LANG_STRING)
        .map(|dt| prefixes.compact(&dt));
    let language = language.map(|t| t.display_text()).filter(|l| !l.is_empty());

    column[id].get_or_insert_with(|| CellValues { values: Vec::new(), datatypes: None, languages: None }).push(
        value.display_text(),
        datatype,
        language,
    );
    Ok(())
}

/// Boolean entities × paths matrix, 1 where the path is missing. Rows are packed
/// into 64-bit words, bit `j % 64` of word `j / 64` holding column `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletenessMatrix {
    n_rows: usize,
    n_paths: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl CompletenessMatrix {
    pub fn zeros(n_rows: usize, n_paths: usize) -> Self {
        let words_per_row = n_paths.div_ceil(64);
        CompletenessMatrix { n_rows, n_paths, words_per_row, bits: vec![0; n_rows * words_per_row] }
    }

    pub fn from_rows(rows: &[Vec<bool>], n_paths: usize) -> Result<Self> {
        let mut m = Self::zeros(rows.len(), n_paths);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_paths {
                return Err(Error::LengthMismatch { left: row.len(), right: n_paths });
            }
            for (c, &b) in row.iter().enumerate() {
                m.set(r, c, b);
            }
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.words_per_row + col / 64] >> (col % 64) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, missing: bool) {
        let word = &mut self.bits[row * self.words_per_row + col / 64];
        if missing {
            *word |= 1 << (col % 64);
        } else {
            *word &= !(1 << (col % 64));
        }
    }

    /// Packed words of one row; padding bits are always zero.
    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    pub fn row_bits(&self, row: usize) -> Vec<bool> {
        (0..self.n_paths).map(|c| self.get(row, c)).collect()
    }

    pub fn missing_in_column(&self, col: usize) -> usize {
        (0..self.n_rows).filter(|&r| self.get(r, col)).count()
    }

    /// Column completeness: share of rows where the path is present.
    pub fn column_completeness(&self, col: usize) -> f64 {
        if self.n_rows == 0 {
            return 0.0;
        }
        (self.n_rows - self.missing_in_column(col)) as f64 / self.n_rows as f64
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of the missing paths of one row.
    pub fn missing_paths(&self, row: usize) -> Vec<usize> {
        (0..self.n_paths).filter(|&c| self.get(row, c)).collect()
    }

    /// New matrix keeping only `cols`, in the given order.
    pub fn restrict(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_paths) {
            return Err(Error::UnknownPath(bad));
        }
        let mut m = Self::zeros(self.n_rows, cols.len());
        for r in 0..self.n_rows {
            for (j, &c) in cols.iter().enumerate() {
                if self.get(r, c) {
                    m.set(r, j, true);
                }
            }
        }
        Ok(m)
    }

    /// `magic "MPCM" | version u32 | rows u64 | paths u64 | rows × ceil(paths/8)
    /// bytes`, little-endian, bit `j % 8` of byte `j / 8` holding column `j`.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&MATRIX_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_rows as u64).to_le_bytes())?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        let bytes_per_row = self.n_paths.div_ceil(8);
        for r in 0..self.n_rows {
            let row: Vec<u8> = self.row_words(r).iter().flat_map(|w| w.to_le_bytes()).collect();
            w.write_all(&row[..bytes_per_row])?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header).map_err(|_| Error::format(MATRIX_FILE, "truncated header"))?;
        if &header[..4] != MATRIX_MAGIC {
            return Err(Error::format(MATRIX_FILE, "bad magic"));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
        if version != MATRIX_VERSION {
            return Err(Error::Version { file: MATRIX_FILE.into(), found: version, expected: MATRIX_VERSION });
        }
        let n_rows = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes")) as usize;
        let n_paths = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes")) as usize;
        let bytes_per_row = n_paths.div_ceil(8);
        let mut m = Self::zeros(n_rows, n_paths);
        let mut buf = vec![0u8; bytes_per_row];
        for row in 0..n_rows {
            r.read_exact(&mut buf).map_err(|_| Error::format(MATRIX_FILE, format!("truncated at entity {row}")))?;
            for c in 0..n_paths {
                if buf[c / 8] >> (c % 8) & 1 == 1 {
                    m.set(row, c, true);
                }
            }
            let padding = (n_paths..bytes_per_row * 8).any(|c| buf[c / 8] >> (c % 8) & 1 == 1);
            if padding {
                return Err(Error::format(MATRIX_FILE, format!("non-zero padding in row of entity {row}")));
            }
        }
        Ok(m)
    }
}

/// Absent cells become 1, present cells 0.
pub fn to_matrix(store: &EntityVectorStore) -> CompletenessMatrix {
    let mut m = CompletenessMatrix::zeros(store.entity_count(), store.path_count());
    for (e, vector) in store.cells.iter().enumerate() {
        for (p, cell) in vector.iter().enumerate() {
            if cell.is_none() {
                m.set(e, p, true);
            }
        }
    }
    m
}

#[derive(Serialize, Deserialize)]
struct VectorsHeader {
    format: String,
    version: u32,
    entities: usize,
    paths: usize,
}

#[derive(Serialize, Deserialize)]
struct VectorLine {
    id: usize,
    uri: String,
    cells: Vec<PathCell>,
}

/// Writes `paths.csv`, `entities.csv`, `vectors.ndjson` and `matrix.bin` into `dir`.
pub fn persist(store: &EntityVectorStore, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_paths(dir.join(PATHS_FILE), &store.paths)?;
    store.entities.write_csv(dir.join(ENTITIES_FILE))?;

    let mut w = BufWriter::new(File::create(dir.join(VECTORS_FILE))?);
    let header = VectorsHeader {
        format: "missingpath-vectors".into(),
        version: VECTORS_VERSION,
        entities: store.entity_count(),
        paths: store.path_count(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for (id, uri) in store.entities.iter() {
        let line = VectorLine { id, uri: uri.to_string(), cells: store.cells[id].clone() };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(MATRIX_FILE))?);
    to_matrix(store).write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a store written by [`persist`].
pub fn load(dir: impl AsRef<Path>) -> Result<EntityVectorStore> {
    let dir = dir.as_ref();
    let paths = read_paths(dir.join(PATHS_FILE))?;
    let entities = EntityIndex::read_csv(dir.join(ENTITIES_FILE))?;
    let reader = BufReader::new(File::open(dir.join(VECTORS_FILE))?);
    let mut lines = reader.lines();

    let header_line = lines.next().ok_or_else(|| Error::format(VECTORS_FILE, "missing header"))??;
    let header: VectorsHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::format(VECTORS_FILE, format!("bad header: {e}")))?;
    if header.version != VECTORS_VERSION {
        return Err(Error::Version { file: VECTORS_FILE.into(), found: header.version, expected: VECTORS_VERSION });
    }
    if header.entities != entities.len() || header.paths != paths.len() {
        return Err(Error::format(VECTORS_FILE, "header dimensions disagree with paths.csv / entities.csv"));
    }

    let mut cells: Vec<Vec<PathCell>> = Vec::with_capacity(entities.len());
    let mut seen = HashSet::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: std::result::Result<VectorLine, _> = serde_json::from_str(&line);
        let record = match parsed {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_u64()));
                let whom = id.map_or(format!("line {}", n + 2), |id| format!("entity {id}"));
                return Err(Error::format(VECTORS_FILE, format!("corrupted row for {whom}: {e}")));
            }
        };
        let id = record.id;
        if id != cells.len() || !seen.insert(id) || entities.uri(id) != Some(record.uri.as_str()) {
            return Err(Error::format(VECTORS_FILE, format!("entity {id} is out of order or unknown")));
        }
        if record.cells.len() != paths.len() || record.cells.iter().flatten().any(|c| !c.is_consistent()) {
            return Err(Error::format(VECTORS_FILE, format!("corrupted row for entity {id}: malformed cells")));
        }
        cells.push(record.cells);
    }
    EntityVectorStore::from_cells(entities, paths, cells)
}

pub fn load_matrix(dir: impl AsRef<Path>) -> Result<CompletenessMatrix> {
    CompletenessMatrix::read_from(BufReader::new(File::open(dir.as_ref().join(MATRIX_FILE))?))
}
