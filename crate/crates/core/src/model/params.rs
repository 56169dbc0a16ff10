use ndarray::{Array1, Array2};

use super::Architecture;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `[out_channels, in_channels * k * k]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MidParams {
    /// 1x1 conv, `[mid_channels, source_channels]`
    pub conv_weight: Array2<f64>,
    pub conv_bias: Array1<f64>,
    /// `[num_classes, mid_channels]`
    pub linear_weight: Array2<f64>,
    pub linear_bias: Array1<f64>,
}

/// All trainable tensors. Also used as the gradient and momentum container.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub convs: Vec<ConvParams>,
    /// Bias-free GAP head, `[num_classes, feature_depth]`.
    pub head: Array2<f64>,
    pub mid: Option<MidParams>,
}

impl Parameters {
    pub fn zeros(arch: &Architecture) -> Self {
        let convs = arch
            .geometries()
            .iter()
            .map(|g| ConvParams {
                weight: Array2::zeros((g.out_channels, g.patch_len())),
                bias: Array1::zeros(g.out_channels),
            })
            .collect();
        let head = Array2::zeros((arch.num_classes, arch.feature_depth()));
        let mid = (arch.model.mid_channels > 0).then(|| {
            let m = arch.model.mid_channels;
            let src = arch.stage_dims(arch.mid_source_stage()).0;
            MidParams {
                conv_weight: Array2::zeros((m, src)),
                conv_bias: Array1::zeros(m),
                linear_weight: Array2::zeros((arch.num_classes, m)),
                linear_bias: Array1::zeros(arch.num_classes),
            }
        });
        Self { convs, head, mid }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Named flat views in a fixed order: `conv{i}.weight`, `conv{i}.bias`,
    /// `head.weight`, then `mid.*` when the branch exists.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((
                format!("conv{i}.weight"),
                c.weight.as_slice().expect("standard layout"),
            ));
            out.push((
                format!("conv{i}.bias"),
                c.bias.as_slice().expect("standard layout"),
            ));
        }
        out.push((
            "head.weight".to_string(),
            self.head.as_slice().expect("standard layout"),
        ));
        if let Some(m) = &self.mid {
            out.push((
                "mid.conv.weight".into(),
                m.conv_weight.as_slice().expect("standard layout"),
            ));
            out.push((
                "mid.conv.bias".into(),
                m.conv_bias.as_slice().expect("standard layout"),
            ));
            out.push((
                "mid.linear.weight".into(),
                m.linear_weight.as_slice().expect("standard layout"),
            ));
            out.push((
                "mid.linear.bias".into(),
                m.linear_bias.as_slice().expect("standard layout"),
            ));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter_mut().enumerate() {
            out.push((
                format!("conv{i}.weight"),
                c.weight.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                format!("conv{i}.bias"),
                c.bias.as_slice_mut().expect("standard layout"),
            ));
        }
        out.push((
            "head.weight".to_string(),
            self.head.as_slice_mut().expect("standard layout"),
        ));
        if let Some(m) = &mut self.mid {
            out.push((
                "mid.conv.weight".into(),
                m.conv_weight.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mid.conv.bias".into(),
                m.conv_bias.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mid.linear.weight".into(),
                m.linear_weight.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                "mid.linear.bias".into(),
                m.linear_bias.as_slice_mut().expect("standard layout"),
            ));
        }
        out
    }

    /// Shapes matching [`tensors`](Self::tensors).
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for c in &self.convs {
            out.push(c.weight.shape().to_vec());
            out.push(c.bias.shape().to_vec());
        }
        out.push(self.head.shape().to_vec());
        if let Some(m) = &self.mid {
            out.push(m.conv_weight.shape().to_vec());
            out.push(m.conv_bias.shape().to_vec());
            out.push(m.linear_weight.shape().to_vec());
            out.push(m.linear_bias.shape().to_vec());
        }
        out
    }

    /// True for tensors that belong to the backbone (conv stack and main head).
    pub fn is_backbone(name: &str) -> bool {
        !name.starts_with("mid.")
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn check_shapes(&self, arch: &Architecture) -> Result<()> {
        let expect = Parameters::zeros(arch);
        if expect.shapes() != self.shapes() {
            return Err(Error::shape(format!(
                "parameter shapes {:?} do not match architecture {:?}",
                self.shapes(),
                expect.shapes()
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}
