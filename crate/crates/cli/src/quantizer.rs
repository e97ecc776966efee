//! Quantizer specs from the command line, and a wrapper over the concrete
//! quantizer types so one family can hold either.

use anyhow::{anyhow, bail, Result};
use bt_core::operator::HermitianOperator;
use bt_core::quantization::{Quantizer, ToeplitzQuantizer};
use bt_core::smearing::{
    expected_metric, heat_quantizer, metaplectic_quantizer, rho_quantizer, vector_twist_quantizer, MarkovOptions,
    RhoField, SmearKind, SmearedQuantizer, VectorField,
};
use bt_core::sphere::{SphereFunction, SpherePoint};
use bt_core::unsharpness::Mat2;

#[derive(Debug, Clone)]
pub enum QuantizerSpec {
    Standard,
    Heat(f64),
    Metaplectic,
    Markov(RhoField),
    Twist(VectorField),
}

impl QuantizerSpec {
    /// `standard`, `heat[:t]`, `markov[:rho]`, `twist[:v]` or `metaplectic`;
    /// the bare forms take their parameter from `t`, `rho` or `v`.
    pub fn parse(spec: &str, t: Option<f64>, rho: Option<&str>, v: Option<&str>) -> Result<Self> {
        let (tag, arg) = match spec.trim().split_once(':') {
            Some((tag, arg)) => (tag, Some(arg)),
            None => (spec.trim(), None),
        };
        Ok(match tag {
            "standard" => Self::Standard,
            "metaplectic" => Self::Metaplectic,
            "heat" => {
                let t = match arg {
                    Some(a) => a.trim().parse().map_err(|_| anyhow!("bad heat parameter `{a}`"))?,
                    None => t.ok_or_else(|| anyhow!("heat needs a parameter: heat:<t> or --t"))?,
                };
                if !f64::is_finite(t) || t < 0.0 {
                    bail!("heat parameter {t} must be a finite number >= 0");
                }
                Self::Heat(t)
            }
            "markov" => {
                let r = arg.or(rho).ok_or_else(|| anyhow!("markov needs a form: markov:<rho> or --rho"))?;
                Self::Markov(RhoField::parse(r)?)
            }
            "twist" => {
                let f = arg.or(v).ok_or_else(|| anyhow!("twist needs a field: twist:<v> or --v"))?;
                Self::Twist(VectorField::parse(f)?)
            }
            other => bail!("unknown quantizer `{other}` (standard, heat:<t>, markov:<rho>, twist:<v>, metaplectic)"),
        })
    }

    fn kind(&self) -> Option<SmearKind> {
        match self {
            Self::Standard => None,
            Self::Heat(t) => Some(SmearKind::Heat { t: *t }),
            Self::Metaplectic => Some(SmearKind::Metaplectic),
            Self::Markov(rho) => Some(SmearKind::Markov {
                rho: rho.clone(),
                options: MarkovOptions::default(),
            }),
            Self::Twist(field) => Some(SmearKind::Twist { field: field.clone() }),
        }
    }

    pub fn build(&self, k: usize, band: usize) -> Result<AnyQuantizer> {
        Ok(match self {
            Self::Standard => AnyQuantizer::Standard(ToeplitzQuantizer::new(k, band)?),
            Self::Heat(t) => AnyQuantizer::Smeared(heat_quantizer(k, band, *t)?),
            Self::Metaplectic => AnyQuantizer::Smeared(metaplectic_quantizer(k, band)?),
            Self::Markov(rho) => AnyQuantizer::Smeared(rho_quantizer(k, band, rho.clone(), MarkovOptions::default())?),
            Self::Twist(field) => AnyQuantizer::Smeared(vector_twist_quantizer(k, band, field.clone())?),
        })
    }

    pub fn family(&self, ks: &[usize], band: usize) -> Result<Vec<AnyQuantizer>> {
        ks.iter().map(|&k| self.build(k, band)).collect()
    }

    /// The unsharpness metric the construction should have.
    pub fn expected_metric(&self, p: &SpherePoint) -> Mat2 {
        match self.kind() {
            None => [[1.0, 0.0], [0.0, 1.0]],
            Some(kind) => expected_metric(&kind, p),
        }
    }

    pub fn is_povm(&self) -> bool {
        !matches!(self, Self::Metaplectic)
    }

    /// Expected first-order trace correction `r`, where it has a closed form.
    pub fn expected_correction(&self) -> Option<SphereFunction> {
        match self {
            Self::Standard | Self::Heat(_) | Self::Metaplectic => Some(SphereFunction::constant(1.0)),
            Self::Twist(field) => Some(&SphereFunction::constant(1.0) + &field.divergence()),
            Self::Markov(_) => None,
        }
    }

    /// Whether the trace correction is exact at every level rather than
    /// only in the limit.
    pub fn correction_is_exact(&self) -> bool {
        match self {
            Self::Twist(field) => field.gradient.is_none(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone)]
pub enum AnyQuantizer {
    Standard(ToeplitzQuantizer),
    Smeared(SmearedQuantizer),
}

impl AnyQuantizer {
    fn inner(&self) -> &dyn Quantizer {
        match self {
            Self::Standard(q) => q,
            Self::Smeared(q) => q,
        }
    }
}

impl Quantizer for AnyQuantizer {
    fn level(&self) -> usize {
        self.inner().level()
    }

    fn quantize(&self, f: &SphereFunction) -> bt_core::Result<HermitianOperator> {
        self.inner().quantize(f)
    }

    fn base(&self) -> &ToeplitzQuantizer {
        self.inner().base()
    }

    fn is_povm(&self) -> bool {
        self.inner().is_povm()
    }

    fn label(&self) -> String {
        self.inner().label()
    }

    fn symbol_band(&self) -> usize {
        Quantizer::symbol_band(self.inner())
    }
}
