use crate::block::{LmiBlock, Sense};
use crate::layout::{DecisionLayout, VarId, VarKind};
use crate::SdpError;
use nalgebra::DVector;
use std::io::{self, Write};

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    Feasibility,
    /// Maximize `log det` of a symmetric matrix variable.
    MaximizeLogDet(VarId),
}

/// LMI blocks over a decision layout, plus scalar lower bounds.
#[derive(Clone, Debug)]
pub struct ConicProblem {
    pub layout: DecisionLayout,
    pub blocks: Vec<LmiBlock>,
    /// `(coordinate, bound)`: `x[coordinate] >= bound`, kept strict by the
    /// barrier.
    pub lower_bounds: Vec<(usize, f64)>,
    pub objective: Objective,
    /// Optional starting point; coordinates with a lower bound are pushed
    /// inside it if needed.
    pub initial: Option<DVector<f64>>,
}

impl ConicProblem {
    pub fn new(layout: DecisionLayout) -> Self {
        Self {
            layout,
            blocks: Vec::new(),
            lower_bounds: Vec::new(),
            objective: Objective::Feasibility,
            initial: None,
        }
    }

    pub fn add_block(&mut self, block: LmiBlock) {
        self.blocks.push(block);
    }

    pub fn add_lower_bound(&mut self, var: VarId, bound: f64) {
        let c = self.layout.scalar_coord(var);
        self.lower_bounds.push((c, bound));
    }

    pub fn n_coords(&self) -> usize {
        self.layout.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let n = self.layout.len();
        for b in &self.blocks {
            if b.constant.shape() != (b.dim, b.dim) {
                return Err(SdpError::Malformed(format!("block {} has wrong constant shape", b.name)));
            }
            for (&k, f) in &b.terms {
                if k >= n {
                    return Err(SdpError::Malformed(format!(
                        "block {} references coordinate {k} of {n}",
                        b.name
                    )));
                }
                if f.shape() != (b.dim, b.dim) {
                    return Err(SdpError::Malformed(format!("block {} has a misshapen term", b.name)));
                }
            }
            let scale = b.terms.values().map(|f| f.abs().max()).fold(b.constant.abs().max(), f64::max);
            if b.max_asymmetry() > 1e-12 * scale.max(1.0) {
                return Err(SdpError::Malformed(format!("block {} is not symmetric", b.name)));
            }
        }
        let mut seen = vec![false; n];
        for &(k, l) in &self.lower_bounds {
            if k >= n || !l.is_finite() {
                return Err(SdpError::Malformed(format!("bad lower bound on coordinate {k}")));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(SdpError::Malformed(format!("coordinate {k} bounded twice")));
            }
        }
        if let Objective::MaximizeLogDet(v) = self.objective {
            if !matches!(self.layout.var(v).kind, VarKind::Symmetric(_)) {
                return Err(SdpError::Malformed("log-det target must be a symmetric variable".into()));
            }
        }
        if let Some(x0) = &self.initial {
            if x0.len() != n {
                return Err(SdpError::Malformed("initial point has the wrong length".into()));
            }
        }
        Ok(())
    }

    /// Plain-text dump: a header line, then per block its name, sense,
    /// dimension and every nonzero coefficient matrix as dense rows.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "conic-problem coords={} blocks={} bounds={}",
            self.layout.len(),
            self.blocks.len(),
            self.lower_bounds.len()
        )?;
        for v in self.layout.variables() {
            writeln!(w, "var {} {:?} offset={}", v.name, v.kind, v.offset)?;
        }
        match self.objective {
            Objective::Feasibility => writeln!(w, "objective feasibility")?,
            Objective::MaximizeLogDet(v) => writeln!(w, "objective maxlogdet {}", self.layout.var(v).name)?,
        }
        for &(k, l) in &self.lower_bounds {
            writeln!(w, "bound {k} >= {l:e}")?;
        }
        for b in &self.blocks {
            let sense = match b.sense {
                Sense::Psd => ">=0",
                Sense::Nsd => "<=0",
            };
            writeln!(w, "block {} {} dim={} terms={}", b.name, sense, b.dim, b.terms.len())?;
            let mut write_matrix = |label: &str, m: &nalgebra::DMatrix<f64>| -> io::Result<()> {
                writeln!(w, "{label}")?;
                for r in 0..m.nrows() {
                    let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
                    writeln!(w, "{}", row.join(" "))?;
                }
                Ok(())
            };
            write_matrix("F0", &b.constant)?;
            for (k, f) in &b.terms {
                write_matrix(&format!("F{k}"), f)?;
            }
        }
        Ok(())
    }
}
