//! Sweep configurations that regenerate each published figure panel.

use serde::Serialize;

use super::{OutputFormat, SweepConfig};
use crate::model::{ModelVariant, PhysicalParams};

pub const PRESET_NAMES: [&str; 12] = [
    "fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b", "fig3c", "fig3d", "fig4a", "fig4b",
    "fig5a", "fig5b",
];

pub const T_ZERO: f64 = 0.0;
pub const T_LOW: f64 = 1e-3;
pub const T_HIGH: f64 = 0.08;

/// One plotted curve: `column` against `log10_photon_number` over the
/// records with this temperature and variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSpec {
    pub label: String,
    pub column: String,
    pub temperature: f64,
    pub variant: ModelVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureSpec {
    pub title: String,
    pub y_label: String,
    pub curves: Vec<CurveSpec>,
}

fn t_label(t: f64) -> &'static str {
    if t == T_ZERO {
        "T = 0"
    } else if t == T_LOW {
        "T = 1 mK"
    } else {
        "T = 80 mK"
    }
}

fn curve(label: String, column: &str, temperature: f64, variant: ModelVariant) -> CurveSpec {
    CurveSpec {
        label,
        column: column.to_string(),
        temperature,
        variant,
    }
}

fn config(
    name: &str,
    temperatures: &[f64],
    variants: &[ModelVariant],
    figure: FigureSpec,
) -> SweepConfig {
    let mut c = SweepConfig::new(name, PhysicalParams::reference());
    c.temperatures = temperatures.to_vec();
    c.variants = variants.to_vec();
    c.formats = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg]
        .into_iter()
        .collect();
    c.figure = Some(figure);
    c
}

fn sources(g: usize, temperatures: &[f64], with: &[(&str, &str)]) -> Vec<CurveSpec> {
    let mut out = Vec::new();
    for &t in temperatures {
        for (label, suffix) in with {
            out.push(curve(
                format!("{label}, {}", t_label(t)),
                &format!("rel_g{g}_{suffix}"),
                t,
                ModelVariant::Quadratic,
            ));
        }
    }
    out
}

fn decomposition(title: &str, y_label: &str, cols: [&str; 3], t: f64) -> FigureSpec {
    FigureSpec {
        title: format!("{title}, {}", t_label(t)),
        y_label: y_label.into(),
        curves: ["QFI", "averages", "variances"]
            .iter()
            .zip(cols)
            .map(|(l, c)| curve(l.to_string(), c, t, ModelVariant::Quadratic))
            .collect(),
    }
}

const QUADRATURES: [(&str, &str); 5] = [
    ("QFI", "global"),
    ("P", "p"),
    ("Q", "q"),
    ("Xb", "xb"),
    ("Pb", "pb"),
];

/// The configuration for a figure panel, or `None` for an unknown name.
pub fn figure_preset(name: &str) -> Option<SweepConfig> {
    use ModelVariant::{Linear, Quadratic};
    let all_t = [T_ZERO, T_LOW, T_HIGH];
    let two_t = [T_ZERO, T_HIGH];
    let rel = |g: usize| format!("relative error bound on g{g}");
    Some(match name {
        "fig1a" => {
            let mut curves = Vec::new();
            for t in all_t {
                for v in [Linear, Quadratic] {
                    curves.push(curve(format!("{v}, {}", t_label(t)), "rel_g1_global", t, v));
                }
            }
            config(
                name,
                &all_t,
                &[Linear, Quadratic],
                FigureSpec {
                    title: "g1 bound from the QFI".into(),
                    y_label: rel(1),
                    curves,
                },
            )
        }
        "fig1b" => config(
            name,
            &all_t,
            &[Quadratic],
            FigureSpec {
                title: "g2 bound from the QFI".into(),
                y_label: rel(2),
                curves: sources(2, &all_t, &[("quadratic", "global")]),
            },
        ),
        "fig2a" | "fig2b" => {
            let g = if name == "fig2a" { 1 } else { 2 };
            config(
                name,
                &two_t,
                &[Quadratic],
                FigureSpec {
                    title: format!("g{g}: global and local QFIs"),
                    y_label: rel(g),
                    curves: sources(
                        g,
                        &two_t,
                        &[
                            ("global", "global"),
                            ("light", "light"),
                            ("mechanics", "mech"),
                        ],
                    ),
                },
            )
        }
        "fig3a" | "fig3b" | "fig3c" | "fig3d" => {
            let g = if matches!(name, "fig3a" | "fig3c") {
                1
            } else {
                2
            };
            let t = if matches!(name, "fig3a" | "fig3b") {
                T_HIGH
            } else {
                T_ZERO
            };
            config(
                name,
                &[t],
                &[Quadratic],
                FigureSpec {
                    title: format!("g{g}: QFI against homodyne, {}", t_label(t)),
                    y_label: rel(g),
                    curves: sources(g, &[t], &QUADRATURES),
                },
            )
        }
        "fig4a" | "fig4b" => {
            let t = if name == "fig4a" { T_ZERO } else { T_HIGH };
            config(
                name,
                &[t],
                &[Quadratic],
                decomposition(
                    "g1 QFI decomposition",
                    "I11 (s^2)",
                    ["i11", "avg11", "var11"],
                    t,
                ),
            )
        }
        "fig5a" | "fig5b" => {
            let t = if name == "fig5a" { T_ZERO } else { T_HIGH };
            config(
                name,
                &[t],
                &[Quadratic],
                decomposition(
                    "dimensionless g2 QFI decomposition",
                    "dimensionless I22",
                    ["it22", "avgt22", "vart22"],
                    t,
                ),
            )
        }
        _ => return None,
    })
}
