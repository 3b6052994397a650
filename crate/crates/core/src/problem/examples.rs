use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde_json::Value;

use super::{MinMaxProblem, ReluNet, Smoothness};
use crate::error::{Error, Result};
use crate::gan::GanSaaInstance;
use crate::geometry::PolyhedralSet;

/// Registered fixture problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExampleId {
    /// `-x² + 5xy - y²` on `[-1,1]²`.
    Quadratic5xy,
    /// `xy - cos y` on `[-1,1] × [-5,5]`.
    XyCos,
    /// Squared output of a two-layer ReLU network; x holds the weights, y the input.
    ReluNetF,
    /// `-|x|⁹ + 3/5 |x|³|y|³ - |y|⁵` on `[-1,1]²`.
    Nonsmooth935,
    /// `-x⁴ + 4x²y² - y⁴` on `[-1,1]²`.
    Quartic4x2y2,
    /// Sample-average GAN objective.
    GanSaa,
}

impl ExampleId {
    pub const ALL: [ExampleId; 6] = [
        ExampleId::Quadratic5xy,
        ExampleId::XyCos,
        ExampleId::ReluNetF,
        ExampleId::Nonsmooth935,
        ExampleId::Quartic4x2y2,
        ExampleId::GanSaa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleId::Quadratic5xy => "quadratic-5xy",
            ExampleId::XyCos => "xy-cos",
            ExampleId::ReluNetF => "relu-net-F",
            ExampleId::Nonsmooth935 => "nonsmooth-935",
            ExampleId::Quartic4x2y2 => "quartic-4x2y2",
            ExampleId::GanSaa => "gan-saa",
        }
    }

    /// Facts about the fixture that the test suite checks.
    pub fn facts(self) -> &'static [&'static str] {
        match self {
            ExampleId::Quadratic5xy => &[
                "phi(x) = 21/4 x^2 on [-2/5, 2/5] and -x^2 + 5x - 1 on [2/5, 1]",
                "(0,0) is global and local minimax with tau(delta) = 2.5 delta, not a (local) saddle",
                "max-min minus min-max over [-d,d]^2 equals -d^2",
            ],
            ExampleId::XyCos => &[
                "(0, pi) and (0, -pi) are global minimax points that fail first-order stationarity",
                "(0,0) is first-order stationary but not local minimax",
            ],
            ExampleId::ReluNetF => &[
                "directional derivative at kinks matches the closed-form activation-pattern rule",
                "params: {\"s\": input dim, \"s1\": hidden width, \"s2\": output dim}, defaults 2, 3, 2",
            ],
            ExampleId::Nonsmooth935 => &[
                "at (0,0): Clarke derivative in x, subderivative in y and second subderivative in y are 0",
                "at (0,0): generalized second derivative in x is nonnegative; the point is d-stationary",
            ],
            ExampleId::Quartic4x2y2 => &[
                "phi(x) = 3 x^4",
                "(0,0) is global and local minimax; both Hessian blocks vanish there",
            ],
            ExampleId::GanSaa => &[
                "f(x, 0) = -2 log 2 for every x",
                "params: {\"s\", \"s1\", \"s2\", \"seed\", optional \"n_samples\", box bounds}",
            ],
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExampleId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownExample(s.to_string()))
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn reject_params(id: ExampleId, params: Option<&Value>) -> Result<()> {
    match params {
        None | Some(Value::Null) => Ok(()),
        Some(Value::Object(map)) if map.is_empty() => Ok(()),
        Some(_) => Err(Error::InvalidParams(format!("{id} takes no parameters"))),
    }
}

fn dim_param(map: &serde_json::Map<String, Value>, key: &str, default: usize) -> Result<usize> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .filter(|&d| d >= 1)
            .map(|d| d as usize)
            .ok_or_else(|| Error::InvalidParams(format!("`{key}` must be a positive integer"))),
    }
}

fn relu_net(params: Option<&Value>) -> Result<MinMaxProblem> {
    let empty = serde_json::Map::new();
    let map = match params {
        None | Some(Value::Null) => &empty,
        Some(Value::Object(m)) => m,
        Some(_) => return Err(Error::InvalidParams("relu-net-F params must be a JSON object".into())),
    };
    if let Some(k) = map.keys().find(|k| !["s", "s1", "s2"].contains(&k.as_str())) {
        return Err(Error::InvalidParams(format!("unknown relu-net-F parameter `{k}`")));
    }
    let net = ReluNet::new(dim_param(map, "s", 2)?, dim_param(map, "s1", 3)?, dim_param(map, "s2", 2)?)?;
    let x_set = PolyhedralSet::cube(net.param_count(), -1.0, 1.0)?;
    let y_set = PolyhedralSet::cube(net.input, -1.0, 1.0)?;
    Ok(MinMaxProblem::new("relu-net-F", x_set, y_set, Smoothness::LocallyLipschitz, move |x, y| {
        net.squared_output(x, y).unwrap_or(f64::NAN)
    }))
}

/// Builds a registered fixture. Only `relu-net-F` and `gan-saa` accept
/// parameters; `gan-saa` requires them.
pub fn build_example(id: ExampleId, params: Option<&Value>) -> Result<MinMaxProblem> {
    let unit = || PolyhedralSet::cube(1, -1.0, 1.0);
    let p = match id {
        ExampleId::Quadratic5xy => {
            reject_params(id, params)?;
            MinMaxProblem::new(id.as_str(), unit()?, unit()?, Smoothness::SmoothC2, |x, y| {
                -x[0] * x[0] + 5.0 * x[0] * y[0] - y[0] * y[0]
            })
            .with_gradients(|x, y| vec![-2.0 * x[0] + 5.0 * y[0]], |x, y| vec![5.0 * x[0] - 2.0 * y[0]])
            .with_hessians(|_, _| scalar(-2.0), |_, _| scalar(-2.0))
        }
        ExampleId::XyCos => {
            reject_params(id, params)?;
            let y_set = PolyhedralSet::cube(1, -5.0, 5.0)?;
            MinMaxProblem::new(id.as_str(), unit()?, y_set, Smoothness::SmoothC2, |x, y| x[0] * y[0] - y[0].cos())
                .with_gradients(|_, y| vec![y[0]], |x, y| vec![x[0] + y[0].sin()])
                .with_hessians(|_, _| scalar(0.0), |_, y| scalar(y[0].cos()))
        }
        ExampleId::ReluNetF => relu_net(params)?,
        ExampleId::Nonsmooth935 => {
            reject_params(id, params)?;
            MinMaxProblem::new(id.as_str(), unit()?, unit()?, Smoothness::LocallyLipschitz, |x, y| {
                let ax = x[0].abs();
                let ay = y[0].abs();
                -ax.powi(9) + 0.6 * ax.powi(3) * ay.powi(3) - ay.powi(5)
            })
        }
        ExampleId::Quartic4x2y2 => {
            reject_params(id, params)?;
            MinMaxProblem::new(id.as_str(), unit()?, unit()?, Smoothness::SmoothC2, |x, y| {
                let (a, b) = (x[0] * x[0], y[0] * y[0]);
                -a * a + 4.0 * a * b - b * b
            })
            .with_gradients(
                |x, y| vec![-4.0 * x[0].powi(3) + 8.0 * x[0] * y[0] * y[0]],
                |x, y| vec![8.0 * x[0] * x[0] * y[0] - 4.0 * y[0].powi(3)],
            )
            .with_hessians(
                |x, y| scalar(-12.0 * x[0] * x[0] + 8.0 * y[0] * y[0]),
                |x, y| scalar(8.0 * x[0] * x[0] - 12.0 * y[0] * y[0]),
            )
        }
        ExampleId::GanSaa => {
            let params = params.ok_or_else(|| Error::InvalidParams("gan-saa requires params".into()))?;
            GanSaaInstance::from_params(params)?.to_problem()
        }
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::problem::envelope_phi;
    use std::f64::consts::PI;

    fn ex(id: ExampleId) -> MinMaxProblem {
        build_example(id, None).unwrap()
    }

    #[test]
    fn registry_round_trip() {
        for id in ExampleId::ALL {
            assert_eq!(id.as_str().parse::<ExampleId>().unwrap(), id);
        }
        assert!("nope".parse::<ExampleId>().is_err());
    }

    #[test]
    fn fixture_values() {
        let q = ex(ExampleId::Quadratic5xy);
        assert!((q.eval(&[0.2], &[1.0]) + 0.04).abs() < 1e-15);
        assert_eq!(q.eval(&[0.0], &[0.0]), 0.0);
        let c = ex(ExampleId::XyCos);
        assert_eq!(c.eval(&[0.0], &[PI]), 1.0);
        assert_eq!(c.y_set().box_bounds().unwrap().1, &[5.0]);
    }

    #[test]
    fn envelope_examples() {
        let g = GridSpec::default();
        let q = ex(ExampleId::Quadratic5xy);
        assert!((envelope_phi(&q, &[0.2], &g).unwrap() - 0.21).abs() < 1e-9);
        assert!((envelope_phi(&q, &[1.0], &g).unwrap() - 3.0).abs() < 1e-9);
        let f = ex(ExampleId::Quartic4x2y2);
        assert!((envelope_phi(&f, &[0.5], &g).unwrap() - 0.1875).abs() < 1e-9);
        assert!(envelope_phi(&q, &[2.0], &g).is_err());
    }

    #[test]
    fn params_validation() {
        let bad = serde_json::json!({"s": 0});
        assert!(build_example(ExampleId::ReluNetF, Some(&bad)).is_err());
        let other = serde_json::json!({"k": 1});
        assert!(build_example(ExampleId::Quadratic5xy, Some(&other)).is_err());
        assert!(build_example(ExampleId::GanSaa, None).is_err());
        let p = build_example(ExampleId::ReluNetF, None).unwrap();
        assert_eq!((p.n(), p.m()), (17, 2));
    }

    #[test]
    fn analytic_gradients_match_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for id in [ExampleId::Quadratic5xy, ExampleId::XyCos, ExampleId::Quartic4x2y2] {
            let p = ex(id);
            let (ylo, yhi) = p.y_set().box_bounds().map(|(l, u)| (l[0], u[0])).unwrap();
            for _ in 0..100 {
                let x = [rng.gen_range(-0.99..0.99)];
                let y = [rng.gen_range(ylo * 0.99..yhi * 0.99)];
                for (a, b) in [
                    (p.grad_x(&x, &y).unwrap()[0], p.fd_grad_x(&x, &y)[0]),
                    (p.grad_y(&x, &y).unwrap()[0], p.fd_grad_y(&x, &y)[0]),
                ] {
                    assert!((a - b).abs() <= 1e-6 * a.abs() + 1e-8, "{id}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn eval_is_pure() {
        let p = ex(ExampleId::Nonsmooth935);
        let a = p.eval(&[0.3], &[-0.7]);
        assert_eq!(a.to_bits(), p.eval(&[0.3], &[-0.7]).to_bits());
    }
}
