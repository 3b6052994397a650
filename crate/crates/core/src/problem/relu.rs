use crate::error::{check_dim, Error, Result};

/// Two-layer ReLU network `z = W₂(W₁ξ + b₁)₊ + b₂` with parameters packed as
/// `(vec W₁, vec W₂, b₁, b₂)`, matrices stored column-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReluNet {
    /// Input dimension.
    pub input: usize,
    /// Hidden width.
    pub hidden: usize,
    /// Output dimension.
    pub output: usize,
}

impl ReluNet {
    pub fn new(input: usize, hidden: usize, output: usize) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::InvalidParams("network dimensions must be at least 1".into()));
        }
        Ok(Self { input, hidden, output })
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.input + self.output * self.hidden + self.hidden + self.output
    }

    /// Offsets of `W₁`, `W₂`, `b₁`, `b₂` inside the packed vector.
    pub fn offsets(&self) -> [usize; 4] {
        let w2 = self.hidden * self.input;
        let b1 = w2 + self.output * self.hidden;
        let b2 = b1 + self.hidden;
        [0, w2, b1, b2]
    }

    /// `W₁ξ + b₁`.
    pub fn pre_activation(&self, params: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.param_count(), params.len())?;
        check_dim(self.input, xi.len())?;
        let [_, _, ob1, _] = self.offsets();
        Ok((0..self.hidden)
            .map(|i| {
                let mut a = 0.0;
                for (j, xj) in xi.iter().enumerate() {
                    a += params[j * self.hidden + i] * xj;
                }
                a + params[ob1 + i]
            })
            .collect())
    }

    pub fn forward(&self, params: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        let a = self.pre_activation(params, xi)?;
        let [_, ow2, _, ob2] = self.offsets();
        Ok((0..self.output)
            .map(|k| {
                let mut z = params[ob2 + k];
                for (i, ai) in a.iter().enumerate() {
                    z += params[ow2 + i * self.output + k] * ai.max(0.0);
                }
                z
            })
            .collect())
    }

    /// `‖z‖²` of the network output.
    pub fn squared_output(&self, params: &[f64], xi: &[f64]) -> Result<f64> {
        Ok(self.forward(params, xi)?.iter().map(|z| z * z).sum())
    }

    /// One-sided derivative of the output along a parameter direction with
    /// `ξ` fixed. A hidden unit sitting exactly at its kink passes the
    /// direction through only when it pushes the pre-activation upward.
    pub fn output_directional(&self, params: &[f64], xi: &[f64], dir: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.param_count(), dir.len())?;
        let a = self.pre_activation(params, xi)?;
        let da = self.pre_activation(dir, xi)?;
        let [_, ow2, _, ob2] = self.offsets();
        let relu_rate: Vec<f64> = a
            .iter()
            .zip(&da)
            .map(|(&ai, &di)| if ai > 0.0 || (ai == 0.0 && di > 0.0) { di } else { 0.0 })
            .collect();
        Ok((0..self.output)
            .map(|k| {
                let mut dz = dir[ob2 + k];
                for i in 0..self.hidden {
                    let w = i * self.output + k;
                    dz += params[ow2 + w] * relu_rate[i] + dir[ow2 + w] * a[i].max(0.0);
                }
                dz
            })
            .collect())
    }

    /// One-sided derivative of `‖z‖²` along a parameter direction.
    pub fn squared_output_directional(&self, params: &[f64], xi: &[f64], dir: &[f64]) -> Result<f64> {
        let z = self.forward(params, xi)?;
        let dz = self.output_directional(params, xi, dir)?;
        Ok(2.0 * z.iter().zip(&dz).map(|(a, b)| a * b).sum::<f64>())
    }
}
