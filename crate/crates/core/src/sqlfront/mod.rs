//! Parser for the comma-join select-project-join subset of SQL.
//!
//! Accepted shape:
//!
//! ```text
//! SELECT <alias.col [AS name], ... | *>
//! FROM <table [AS] alias>, ...
//! [WHERE <conjunct> AND <conjunct> ...] [;]
//! ```
//!
//! Each conjunct is either an equijoin between two relations or a comparison
//! of a column against a literal. Everything else is rejected by name.

mod lexer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use lexer::{tokenize, CmpOp, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported construct: {construct}")]
    Unsupported {
        construct: String,
        line: usize,
        column: usize,
    },
    #[error("unknown alias `{0}`")]
    UnknownAlias(String),
    #[error("duplicate alias `{0}`")]
    DuplicateAlias(String),
    #[error("self-join edge on alias `{0}`")]
    SelfJoinEdge(String),
    #[error("disconnected join graph: {0:?} not reachable from `{1}`")]
    Disconnected(Vec<String>, String),
}

impl SqlError {
    fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        SqlError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn unsupported(tok: &Token, construct: impl Into<String>) -> Self {
        SqlError::Unsupported {
            construct: construct.into(),
            line: tok.line,
            column: tok.column,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnRef {
    pub alias: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(alias: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            alias: alias.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alias, self.column)
    }
}

/// A literal operand. Numbers keep their source spelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Number(String),
    Text(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => f.write_str(n),
            Literal::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for RangeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RangeOp::Lt => "<",
            RangeOp::Le => "<=",
            RangeOp::Gt => ">",
            RangeOp::Ge => ">=",
        })
    }
}

/// Equality between columns of two different relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinEdge {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

impl JoinEdge {
    /// Whether both edges connect the same pair of columns, in either order.
    pub fn same_columns(&self, other: &JoinEdge) -> bool {
        (self.left == other.left && self.right == other.right)
            || (self.left == other.right && self.right == other.left)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Equals { column: ColumnRef, value: Literal },
    Range { column: ColumnRef, op: RangeOp, value: Literal },
    EquiJoin(JoinEdge),
    /// A constant comparison that always holds, e.g. `1 = 1`.
    Tautology,
}

impl Predicate {
    /// The column a filter restricts, if any.
    pub fn target(&self) -> Option<&ColumnRef> {
        match self {
            Predicate::Equals { column, .. } | Predicate::Range { column, .. } => Some(column),
            Predicate::EquiJoin(edge) => Some(&edge.left),
            Predicate::Tautology => None,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Equals { column, value } => write!(f, "{column} = {value}"),
            Predicate::Range { column, op, value } => write!(f, "{column} {op} {value}"),
            Predicate::EquiJoin(edge) => write!(f, "{} = {}", edge.left, edge.right),
            Predicate::Tautology => f.write_str("1 = 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub alias: String,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub column: ColumnRef,
    pub output_name: Option<String>,
}

/// A parsed select-project-join query.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryGraph {
    pub relations: Vec<Relation>,
    pub join_edges: Vec<JoinEdge>,
    pub filters: Vec<Predicate>,
    /// Empty for `SELECT *`.
    pub projections: Vec<Projection>,
}

impl QueryGraph {
    pub fn relation(&self, alias: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.alias == alias)
    }

    pub fn relation_index(&self, alias: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.alias == alias)
    }

    /// Filters restricting the relation with the given alias.
    pub fn filters_on<'a>(&'a self, alias: &'a str) -> impl Iterator<Item = &'a Predicate> + 'a {
        self.filters
            .iter()
            .filter(move |p| p.target().is_some_and(|c| c.alias == alias))
    }

    /// Join edges with duplicates (same column pair in either order) removed.
    pub fn distinct_edges(&self) -> Vec<&JoinEdge> {
        let mut out: Vec<&JoinEdge> = Vec::new();
        for edge in &self.join_edges {
            if !out.iter().any(|e| e.same_columns(edge)) {
                out.push(edge);
            }
        }
        out
    }

    /// Renders the graph as canonical SQL: edges first, then filters.
    pub fn to_sql(&self) -> String {
        let mut sql = String::from("SELECT ");
        if self.projections.is_empty() {
            sql.push('*');
        } else {
            let cols: Vec<String> = self
                .projections
                .iter()
                .map(|p| match &p.output_name {
                    Some(name) => format!("{} AS {}", p.column, name),
                    None => p.column.to_string(),
                })
                .collect();
            sql.push_str(&cols.join(", "));
        }
        sql.push_str(" FROM ");
        let rels: Vec<String> = self
            .relations
            .iter()
            .map(|r| format!("{} AS {}", r.table, r.alias))
            .collect();
        sql.push_str(&rels.join(", "));
        let conjuncts: Vec<String> = self
            .join_edges
            .iter()
            .map(|e| format!("{} = {}", e.left, e.right))
            .chain(self.filters.iter().map(|p| p.to_string()))
            .collect();
        if !conjuncts.is_empty() {
            sql.push_str(" WHERE ");
            sql.push_str(&conjuncts.join(" AND "));
        }
        sql
    }

    fn check_connected(&self) -> Result<(), SqlError> {
        let Some(first) = self.relations.first() else {
            return Ok(());
        };
        let mut reached = BTreeSet::from([first.alias.as_str()]);
        let mut changed = true;
        while changed {
            changed = false;
            for e in &self.join_edges {
                let (l, r) = (e.left.alias.as_str(), e.right.alias.as_str());
                if reached.contains(l) != reached.contains(r) {
                    reached.insert(l);
                    reached.insert(r);
                    changed = true;
                }
            }
        }
        let missing: Vec<String> = self
            .relations
            .iter()
            .filter(|r| !reached.contains(r.alias.as_str()))
            .map(|r| r.alias.clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(SqlError::Disconnected(missing, first.alias.clone()))
        }
    }
}

/// Parses query text into a [`QueryGraph`].
pub fn parse_query(text: &str) -> Result<QueryGraph, SqlError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let graph = parser.query()?;
    graph.check_connected()?;
    Ok(graph)
}

// Words that end a clause or name a construct outside the subset.
const UNSUPPORTED_WORDS: &[(&str, &str)] = &[
    ("or", "OR"),
    ("not", "NOT"),
    ("in", "IN"),
    ("like", "LIKE"),
    ("between", "BETWEEN"),
    ("is", "IS"),
    ("exists", "EXISTS"),
    ("having", "HAVING"),
    ("limit", "LIMIT"),
    ("offset", "OFFSET"),
    ("union", "UNION"),
    ("intersect", "INTERSECT"),
    ("except", "EXCEPT"),
    ("join", "JOIN"),
    ("inner", "JOIN"),
    ("left", "JOIN"),
    ("right", "JOIN"),
    ("full", "JOIN"),
    ("cross", "JOIN"),
    ("natural", "JOIN"),
    ("on", "JOIN"),
    ("distinct", "DISTINCT"),
    ("case", "CASE"),
    ("with", "WITH"),
];

const RESERVED: &[&str] = &["select", "from", "where", "and", "as", "group", "order", "by"];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i]
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Word(w) if w == word)
    }

    fn error_here(&self, message: impl Into<String>) -> SqlError {
        let tok = self.peek();
        SqlError::syntax(tok.line, tok.column, message)
    }

    /// Rejects a token that names a construct outside the subset.
    fn reject_unsupported(&self) -> Result<(), SqlError> {
        let tok = self.peek();
        match &tok.kind {
            TokenKind::Word(w) if w == "group" || w == "order" => {
                let name = if w == "group" { "GROUP BY" } else { "ORDER BY" };
                Err(SqlError::unsupported(tok, name))
            }
            TokenKind::Word(w) => match UNSUPPORTED_WORDS.iter().find(|(k, _)| k == w) {
                Some((_, name)) => Err(SqlError::unsupported(tok, *name)),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), SqlError> {
        if self.is_word(word) {
            self.advance();
            Ok(())
        } else {
            self.reject_unsupported()?;
            Err(self.error_here(format!("expected {}", word.to_uppercase())))
        }
    }

    fn identifier(&mut self, what: &str) -> Result<String, SqlError> {
        self.reject_unsupported()?;
        match &self.peek().kind {
            TokenKind::Word(w) if !RESERVED.contains(&w.as_str()) => {
                let w = w.clone();
                self.advance();
                Ok(w)
            }
            _ => Err(self.error_here(format!("expected {what}"))),
        }
    }

    fn query(&mut self) -> Result<QueryGraph, SqlError> {
        self.expect_word("select")?;
        let projections = self.select_list()?;
        self.expect_word("from")?;
        let relations = self.relation_list()?;

        let mut graph = QueryGraph {
            relations,
            projections: Vec::new(),
            ..Default::default()
        };

        let mut seen = BTreeMap::new();
        for r in &graph.relations {
            if seen.insert(r.alias.clone(), ()).is_some() {
                return Err(SqlError::DuplicateAlias(r.alias.clone()));
            }
        }

        graph.projections = projections
            .into_iter()
            .map(|(col, tok, name)| {
                Ok(Projection {
                    column: resolve(&graph, col, &tok)?,
                    output_name: name,
                })
            })
            .collect::<Result<_, SqlError>>()?;

        if self.is_word("where") {
            self.advance();
            loop {
                self.conjunct(&mut graph)?;
                if self.is_word("and") {
                    self.advance();
                } else {
                    break;
                }
            }
        }

        self.reject_unsupported()?;
        if self.peek().kind == TokenKind::Semicolon {
            self.advance();
        }
        match self.peek().kind {
            TokenKind::Eof => Ok(graph),
            _ => {
                self.reject_unsupported()?;
                Err(self.error_here("unexpected trailing input"))
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn select_list(&mut self) -> Result<Vec<(UnresolvedColumn, Token, Option<String>)>, SqlError> {
        if self.peek().kind == TokenKind::Star {
            self.advance();
            return Ok(Vec::new());
        }
        let mut items = Vec::new();
        loop {
            let tok = self.peek().clone();
            let col = self.column_ref()?;
            let name = if self.is_word("as") {
                self.advance();
                Some(self.identifier("output column name")?)
            } else {
                None
            };
            items.push((col, tok, name));
            if self.peek().kind == TokenKind::Comma {
                self.advance();
            } else {
                break;
            }
        }
        Ok(items)
    }

    fn relation_list(&mut self) -> Result<Vec<Relation>, SqlError> {
        let mut relations = Vec::new();
        loop {
            if self.peek().kind == TokenKind::LParen {
                return Err(SqlError::unsupported(self.peek(), "subquery"));
            }
            let table = self.identifier("table name")?;
            let alias = if self.is_word("as") {
                self.advance();
                self.identifier("alias")?
            } else if matches!(&self.peek().kind, TokenKind::Word(w)
                if !RESERVED.contains(&w.as_str()) && !UNSUPPORTED_WORDS.iter().any(|(k, _)| k == w))
            {
                self.identifier("alias")?
            } else {
                table.clone()
            };
            relations.push(Relation { alias, table });
            if self.peek().kind == TokenKind::Comma {
                self.advance();
            } else {
                break;
            }
        }
        Ok(relations)
    }

    fn column_ref(&mut self) -> Result<UnresolvedColumn, SqlError> {
        if self.peek().kind == TokenKind::Star {
            return Err(self.error_here("`*` must be the only select item"));
        }
        let first = self.identifier("column reference")?;
        if self.peek().kind == TokenKind::LParen {
            let tok = self.tokens[self.pos - 1].clone();
            return Err(SqlError::unsupported(&tok, format!("function call {}", first.to_uppercase())));
        }
        if self.peek().kind == TokenKind::Dot {
            self.advance();
            let column = self.identifier("column name")?;
            Ok(UnresolvedColumn {
                alias: Some(first),
                column,
            })
        } else {
            Ok(UnresolvedColumn {
                alias: None,
                column: first,
            })
        }
    }

    fn operand(&mut self) -> Result<(Operand, Token), SqlError> {
        let tok = self.peek().clone();
        let operand = match &tok.kind {
            TokenKind::Number(n) => {
                let n = n.clone();
                self.advance();
                Operand::Literal(Literal::Number(n))
            }
            TokenKind::Text(s) => {
                let s = s.clone();
                self.advance();
                Operand::Literal(Literal::Text(s))
            }
            TokenKind::LParen => {
                if matches!(&self.peek_at(1).kind, TokenKind::Word(w) if w == "select") {
                    return Err(SqlError::unsupported(&tok, "subquery"));
                }
                return Err(SqlError::unsupported(&tok, "parenthesized expression"));
            }
            TokenKind::Word(_) => Operand::Column(self.column_ref()?),
            _ => return Err(self.error_here("expected column or literal")),
        };
        Ok((operand, tok))
    }

    fn conjunct(&mut self, graph: &mut QueryGraph) -> Result<(), SqlError> {
        let (lhs, lhs_tok) = self.operand()?;
        self.reject_unsupported()?;
        let op_tok = self.peek().clone();
        let op = match op_tok.kind {
            TokenKind::Cmp(op) => op,
            _ => return Err(self.error_here("expected comparison operator")),
        };
        self.advance();
        let (rhs, rhs_tok) = self.operand()?;
        // An OR right after a comparison must be reported, not treated as trailing input.
        self.reject_unsupported()?;

        if op == CmpOp::Ne {
            return Err(SqlError::unsupported(&op_tok, "<>"));
        }

        match (lhs, rhs) {
            (Operand::Column(l), Operand::Column(r)) => {
                let left = resolve(graph, l, &lhs_tok)?;
                let right = resolve(graph, r, &rhs_tok)?;
                if op != CmpOp::Eq {
                    return Err(SqlError::unsupported(&op_tok, "non-equality join predicate"));
                }
                if left.alias == right.alias {
                    return Err(SqlError::SelfJoinEdge(left.alias));
                }
                graph.join_edges.push(JoinEdge { left, right });
            }
            (Operand::Column(c), Operand::Literal(value)) => {
                let column = resolve(graph, c, &lhs_tok)?;
                graph.filters.push(filter(column, op, value));
            }
            (Operand::Literal(value), Operand::Column(c)) => {
                let column = resolve(graph, c, &rhs_tok)?;
                graph.filters.push(filter(column, op.flipped(), value));
            }
            (Operand::Literal(a), Operand::Literal(b)) => {
                if op == CmpOp::Eq && a == b {
                    graph.filters.push(Predicate::Tautology);
                } else {
                    return Err(SqlError::unsupported(&lhs_tok, "constant comparison"));
                }
            }
        }
        Ok(())
    }
}

struct UnresolvedColumn {
    alias: Option<String>,
    column: String,
}

enum Operand {
    Column(UnresolvedColumn),
    Literal(Literal),
}

fn resolve(graph: &QueryGraph, col: UnresolvedColumn, tok: &Token) -> Result<ColumnRef, SqlError> {
    match col.alias {
        Some(alias) => {
            if graph.relation(&alias).is_none() {
                return Err(SqlError::UnknownAlias(alias));
            }
            Ok(ColumnRef::new(alias, col.column))
        }
        None if graph.relations.len() == 1 => Ok(ColumnRef::new(graph.relations[0].alias.clone(), col.column)),
        None => Err(SqlError::syntax(
            tok.line,
            tok.column,
            format!("column `{}` must be qualified with an alias", col.column),
        )),
    }
}

fn filter(column: ColumnRef, op: CmpOp, value: Literal) -> Predicate {
    let range = match op {
        CmpOp::Eq => return Predicate::Equals { column, value },
        CmpOp::Lt => RangeOp::Lt,
        CmpOp::Le => RangeOp::Le,
        CmpOp::Gt => RangeOp::Gt,
        CmpOp::Ge => RangeOp::Ge,
        CmpOp::Ne => unreachable!("rejected before classification"),
    };
    Predicate::Range {
        column,
        op: range,
        value,
    }
}
