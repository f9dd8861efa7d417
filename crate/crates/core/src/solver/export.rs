//! LP / MPS writers and a file bridge that re-solves exported text with the
//! backend's own reader.

use std::collections::{BTreeMap, HashMap};
use std::ffi::{CStr, CString};
use std::fmt::Write as _;
use std::io::Write as _;
use std::os::raw::c_char;

use serde::{Deserialize, Serialize};

use super::{LinearModel, ObjSense, RowSense, SolveParams, SolveStatus, SolverError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Lp,
    Mps,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Lp => "lp",
            ExportFormat::Mps => "mps",
        }
    }
}

const OBJ_CONSTANT: &str = "obj_constant";

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect();
    // trailing separators produced by closing brackets carry no information
    while out.ends_with('_') && out.len() > 1 {
        out.pop();
    }
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, 'n');
    }
    // LP readers treat these as section or bound keywords
    const KEYWORDS: [&str; 14] = [
        "free", "inf", "infinity", "st", "s.t.", "subject", "bounds", "bound", "end", "generals", "general",
        "binary", "binaries", "semi",
    ];
    if KEYWORDS.contains(&out.to_ascii_lowercase().as_str()) {
        out.insert_str(0, "v_");
    }
    out
}

fn sanitized_names<'a>(
    names: impl Iterator<Item = &'a str>,
    reserved: &[&str],
) -> Result<Vec<String>, SolverError> {
    let mut seen: HashMap<String, String> = reserved.iter().map(|r| (r.to_string(), r.to_string())).collect();
    let mut out = Vec::new();
    for n in names {
        let s = sanitize(n);
        if let Some(prev) = seen.get(&s) {
            return Err(SolverError::NameCollision(prev.clone(), n.to_string(), s));
        }
        seen.insert(s.clone(), n.to_string());
        out.push(s);
    }
    Ok(out)
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

/// Renders `model` as CPLEX-LP or MPS text. Output is a pure function of the
/// model: identical models produce byte-identical text.
pub fn export_model(model: &LinearModel, format: ExportFormat) -> Result<String, SolverError> {
    let cols = sanitized_names(model.vars().iter().map(|v| v.name.as_str()), &[OBJ_CONSTANT])?;
    let rows = sanitized_names(model.rows().iter().map(|r| r.name.as_str()), &["obj"])?;
    Ok(match format {
        ExportFormat::Lp => write_lp(model, &cols, &rows),
        ExportFormat::Mps => write_mps(model, &cols, &rows),
    })
}

fn write_lp(model: &LinearModel, cols: &[String], rows: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "\\ Problem: {}", sanitize(model.name()));
    s.push_str(match model.objective().sense {
        ObjSense::Minimize => "Minimize\n",
        ObjSense::Maximize => "Maximize\n",
    });
    s.push_str(" obj:");
    let constant = model.objective().constant;
    for &(v, c) in &model.objective().terms {
        push_term(&mut s, c, &cols[v.0]);
    }
    if constant != 0.0 {
        push_term(&mut s, constant, OBJ_CONSTANT);
    }
    s.push('\n');
    s.push_str("Subject To\n");
    for (r, name) in model.rows().iter().zip(rows) {
        let _ = write!(s, " {name}:");
        if r.terms.is_empty() {
            // keep the row well-formed for readers that reject empty rows
            let _ = write!(s, " 0 {}", cols.first().map(String::as_str).unwrap_or(OBJ_CONSTANT));
        }
        for &(v, c) in &r.terms {
            push_term(&mut s, c, &cols[v.0]);
        }
        let _ = writeln!(s, " {} {}", r.sense, fmt_num(r.rhs));
    }
    s.push_str("Bounds\n");
    for (v, name) in model.vars().iter().zip(cols) {
        let line = match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => format!(" {name} free"),
            (true, false) => format!(" {name} >= {}", fmt_num(v.lower)),
            (false, true) => format!(" -inf <= {name} <= {}", fmt_num(v.upper)),
            (true, true) if v.lower == v.upper => format!(" {name} = {}", fmt_num(v.lower)),
            (true, true) => format!(" {} <= {name} <= {}", fmt_num(v.lower), fmt_num(v.upper)),
        };
        s.push_str(&line);
        s.push('\n');
    }
    if constant != 0.0 {
        let _ = writeln!(s, " {OBJ_CONSTANT} = 1");
    }
    let ints: Vec<&str> = model
        .vars()
        .iter()
        .zip(cols)
        .filter(|(v, _)| v.integer)
        .map(|(_, n)| n.as_str())
        .collect();
    if !ints.is_empty() {
        s.push_str("Generals\n");
        for n in ints {
            let _ = writeln!(s, " {n}");
        }
    }
    s.push_str("End\n");
    s
}

fn push_term(s: &mut String, c: f64, name: &str) {
    if c < 0.0 {
        let _ = write!(s, " - {} {name}", fmt_num(-c));
    } else {
        let _ = write!(s, " + {} {name}", fmt_num(c));
    }
}

fn write_mps(model: &LinearModel, cols: &[String], rows: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME          {}", sanitize(model.name()));
    if model.objective().sense == ObjSense::Maximize {
        s.push_str("OBJSENSE\n    MAX\n");
    }
    s.push_str("ROWS\n N  obj\n");
    for (r, name) in model.rows().iter().zip(rows) {
        let tag = match r.sense {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        let _ = writeln!(s, " {tag}  {name}");
    }

    // column-major entries, rows in model order
    let mut entries: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.num_vars()];
    for &(v, c) in &model.objective().terms {
        entries[v.0].push(("obj", c));
    }
    for (r, name) in model.rows().iter().zip(rows) {
        for &(v, c) in &r.terms {
            entries[v.0].push((name.as_str(), c));
        }
    }
    s.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (k, (v, name)) in model.vars().iter().zip(cols).enumerate() {
        if v.integer != in_int {
            let kind = if v.integer { "INTORG" } else { "INTEND" };
            let _ = writeln!(s, "    MARKER{marker:<6}  'MARKER'  '{kind}'");
            marker += 1;
            in_int = v.integer;
        }
        if entries[k].is_empty() {
            let _ = writeln!(s, "    {name}  obj  0");
        }
        for (row, c) in &entries[k] {
            let _ = writeln!(s, "    {name}  {row}  {}", fmt_num(*c));
        }
    }
    if in_int {
        let _ = writeln!(s, "    MARKER{marker:<6}  'MARKER'  'INTEND'");
    }
    let constant = model.objective().constant;
    if constant != 0.0 {
        let _ = writeln!(s, "    {OBJ_CONSTANT}  obj  {}", fmt_num(constant));
    }

    s.push_str("RHS\n");
    for (r, name) in model.rows().iter().zip(rows) {
        if r.rhs != 0.0 {
            let _ = writeln!(s, "    RHS  {name}  {}", fmt_num(r.rhs));
        }
    }

    s.push_str("BOUNDS\n");
    for (v, name) in model.vars().iter().zip(cols) {
        let (lo, up) = (v.lower, v.upper);
        if lo.is_finite() && lo == up {
            let _ = writeln!(s, " FX BND  {name}  {}", fmt_num(lo));
            continue;
        }
        match (lo.is_finite(), up.is_finite()) {
            (false, false) => {
                let _ = writeln!(s, " FR BND  {name}");
            }
            (false, true) => {
                let _ = writeln!(s, " MI BND  {name}");
                let _ = writeln!(s, " UP BND  {name}  {}", fmt_num(up));
            }
            (true, fin_up) => {
                if lo != 0.0 || v.integer {
                    let _ = writeln!(s, " LO BND  {name}  {}", fmt_num(lo));
                }
                if fin_up {
                    let _ = writeln!(s, " UP BND  {name}  {}", fmt_num(up));
                } else if v.integer {
                    let _ = writeln!(s, " PL BND  {name}");
                }
            }
        }
    }
    if constant != 0.0 {
        let _ = writeln!(s, " FX BND  {OBJ_CONSTANT}  1");
    }
    s.push_str("ENDATA\n");
    s
}

/// Result of re-solving exported text.
#[derive(Clone, Debug)]
pub struct ExternalSolve {
    pub status: SolveStatus,
    pub objective: f64,
    /// Values keyed by the sanitized column names found in the file.
    pub values: BTreeMap<String, f64>,
}

/// Writes `text` to a temporary file and solves it with the backend's file
/// reader.
pub fn solve_exported(text: &str, format: ExportFormat, params: &SolveParams) -> Result<ExternalSolve, SolverError> {
    let mut file = tempfile::Builder::new()
        .prefix("rodplan-")
        .suffix(&format!(".{}", format.extension()))
        .tempfile()?;
    file.write_all(text.as_bytes())?;
    file.flush()?;
    let path = CString::new(file.path().to_string_lossy().as_bytes())
        .map_err(|e| SolverError::Backend(e.to_string()))?;

    struct Handle(*mut std::os::raw::c_void);
    impl Drop for Handle {
        fn drop(&mut self) {
            unsafe { highs_sys::Highs_destroy(self.0) }
        }
    }
    let h = Handle(unsafe { highs_sys::Highs_create() });
    let opt = |name: &CStr| name.as_ptr();
    unsafe {
        highs_sys::Highs_setBoolOptionValue(h.0, opt(c"output_flag"), 0);
        highs_sys::Highs_setDoubleOptionValue(h.0, opt(c"mip_rel_gap"), params.rel_gap);
        highs_sys::Highs_setDoubleOptionValue(h.0, opt(c"mip_abs_gap"), 1e-10);
        highs_sys::Highs_setIntOptionValue(h.0, opt(c"random_seed"), params.seed as _);
        highs_sys::Highs_setIntOptionValue(h.0, opt(c"threads"), 1);
        if let Some(limit) = params.time_limit {
            highs_sys::Highs_setDoubleOptionValue(h.0, opt(c"time_limit"), limit);
        }
    }
    let read = unsafe { highs_sys::Highs_readModel(h.0, path.as_ptr()) };
    if read == highs_sys::STATUS_ERROR {
        return Err(SolverError::Backend(format!("HiGHS could not read exported {format:?} model")));
    }
    let ran = unsafe { highs_sys::Highs_run(h.0) };
    if ran == highs_sys::STATUS_ERROR {
        return Err(SolverError::Backend("HiGHS run on exported model failed".into()));
    }
    let ms = unsafe { highs_sys::Highs_getModelStatus(h.0) };
    let status = match ms {
        highs_sys::MODEL_STATUS_OPTIMAL | highs_sys::MODEL_STATUS_MODEL_EMPTY => SolveStatus::Optimal,
        highs_sys::MODEL_STATUS_INFEASIBLE => SolveStatus::Infeasible,
        highs_sys::MODEL_STATUS_UNBOUNDED | highs_sys::MODEL_STATUS_UNBOUNDED_OR_INFEASIBLE => SolveStatus::Unbounded,
        highs_sys::MODEL_STATUS_REACHED_TIME_LIMIT => SolveStatus::TimeLimit,
        other => return Err(SolverError::Backend(format!("HiGHS returned model status {other}"))),
    };
    let ncol = unsafe { highs_sys::Highs_getNumCol(h.0) } as usize;
    let nrow = unsafe { highs_sys::Highs_getNumRow(h.0) } as usize;
    let mut values = BTreeMap::new();
    let mut objective = unsafe { highs_sys::Highs_getObjectiveValue(h.0) };
    if status == SolveStatus::Optimal && ncol > 0 {
        let mut cv = vec![0.0; ncol];
        let mut cd = vec![0.0; ncol];
        let mut rv = vec![0.0; nrow];
        let mut rd = vec![0.0; nrow];
        unsafe {
            highs_sys::Highs_getSolution(h.0, cv.as_mut_ptr(), cd.as_mut_ptr(), rv.as_mut_ptr(), rd.as_mut_ptr());
        }
        let mut buf = vec![0 as c_char; 1024];
        for (k, &x) in cv.iter().enumerate() {
            unsafe { highs_sys::Highs_getColName(h.0, k as _, buf.as_mut_ptr()) };
            let name = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
            if name != OBJ_CONSTANT {
                values.insert(name, x);
            }
        }
    } else if status == SolveStatus::Optimal {
        objective = 0.0;
    }
    Ok(ExternalSolve { status, objective, values })
}
