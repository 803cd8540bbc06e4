use std::io::Write;

use nalgebra::DMatrix;

use super::Intervention;
use crate::error::{Error, Result};
use crate::graph::check_index;

/// One experimental condition: an i.i.d. sample and the intervention that
/// produced it (`None` for observational data).
#[derive(Clone, Debug)]
pub struct Environment {
    data: DMatrix<f64>,
    intervention: Option<Intervention>,
    /// `Z^T Z` for `Z = [1, X - shift]`.
    moments: DMatrix<f64>,
}

impl Environment {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn intervention(&self) -> Option<&Intervention> {
        self.intervention.as_ref()
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub(crate) fn moments(&self) -> &DMatrix<f64> {
        &self.moments
    }
}

/// An append-only, ordered collection of environments sharing one set of
/// columns (all SCM nodes, response included).
#[derive(Clone, Debug)]
pub struct EnvironmentSet {
    response: usize,
    shift: Vec<f64>,
    envs: Vec<Environment>,
}

impl EnvironmentSet {
    /// Starts a collection from a first environment.
    pub fn new(
        data: DMatrix<f64>,
        intervention: Option<Intervention>,
        response: usize,
    ) -> Result<Self> {
        check_index(response, data.ncols())?;
        if data.nrows() == 0 {
            return Err(Error::SampleSize { got: 0, need: 1 });
        }
        // centering constant for the moment matrices; residuals do not depend on it
        let shift: Vec<f64> = (0..data.ncols()).map(|j| data.column(j).mean()).collect();
        let mut set = EnvironmentSet {
            response,
            shift,
            envs: Vec::new(),
        };
        set.push(data, intervention)?;
        Ok(set)
    }

    pub fn observational(data: DMatrix<f64>, response: usize) -> Result<Self> {
        Self::new(data, None, response)
    }

    pub fn push(&mut self, data: DMatrix<f64>, intervention: Option<Intervention>) -> Result<()> {
        let cols = self.shift.len();
        if data.ncols() != cols {
            return Err(Error::arg(format!(
                "environment has {} columns, expected {cols}",
                data.ncols()
            )));
        }
        if data.nrows() == 0 {
            return Err(Error::SampleSize { got: 0, need: 1 });
        }
        if let Some(iv) = &intervention {
            check_index(iv.target, cols)?;
            if iv.target == self.response {
                return Err(Error::arg("interventions on the response are not allowed"));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("environment data contains non-finite values"));
        }
        let n = data.nrows();
        let mut z = DMatrix::<f64>::zeros(n, cols + 1);
        z.column_mut(0).fill(1.0);
        for j in 0..cols {
            let s = self.shift[j];
            for (dst, src) in z.column_mut(j + 1).iter_mut().zip(data.column(j).iter()) {
                *dst = src - s;
            }
        }
        let moments = z.tr_mul(&z);
        self.envs.push(Environment {
            data,
            intervention,
            moments,
        });
        Ok(())
    }

    pub fn response(&self) -> usize {
        self.response
    }

    pub fn num_columns(&self) -> usize {
        self.shift.len()
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn environments(&self) -> &[Environment] {
        &self.envs
    }

    pub fn get(&self, i: usize) -> Option<&Environment> {
        self.envs.get(i)
    }

    pub fn total_rows(&self) -> usize {
        self.envs.iter().map(Environment::len).sum()
    }

    /// All environments stacked in order.
    pub fn pooled_data(&self) -> DMatrix<f64> {
        let rows = self.total_rows();
        let mut out = DMatrix::zeros(rows, self.num_columns());
        let mut r = 0;
        for e in &self.envs {
            out.rows_mut(r, e.len()).copy_from(&e.data);
            r += e.len();
        }
        out
    }
}

/// Writes a data matrix as CSV: predictors in ascending node order labelled
/// `X<node>`, then the response labelled `Y`.
pub fn write_csv<W: Write>(data: &DMatrix<f64>, response: usize, out: &mut W) -> Result<()> {
    check_index(response, data.ncols())?;
    let cols: Vec<usize> = (0..data.ncols())
        .filter(|&j| j != response)
        .chain(std::iter::once(response))
        .collect();
    let header: Vec<String> = cols
        .iter()
        .map(|&j| if j == response { "Y".to_string() } else { format!("X{j}") })
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for r in 0..data.nrows() {
        let row: Vec<String> = cols.iter().map(|&j| data[(r, j)].to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
