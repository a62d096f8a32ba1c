//! The embedding network: a stack of affine+ReLU pairs whose final activation
//! is the clustered embedding, topped by a two-way foreground/background
//! classifier.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{relu_backward, relu_forward, AffineLayer};

#[derive(Debug, Clone)]
pub struct EmbeddingNet {
    layers: Vec<AffineLayer>,
    classifier: AffineLayer,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug)]
pub struct ForwardCache {
    /// Input to each affine+ReLU pair; `inputs[0]` is the batch itself.
    pub(crate) inputs: Vec<Matrix>,
    /// Affine outputs before the ReLU, one per pair.
    pub(crate) pre_activations: Vec<Matrix>,
    /// Activation of the last pair (or the input when there are no pairs):
    /// the space in which clustering happens.
    pub embedding: Matrix,
    /// Two-way classifier outputs.
    pub logits: Matrix,
}

impl EmbeddingNet {
    /// Seeded init; hidden weights and the classifier draw from N(0, 0.1²),
    /// biases start at zero.
    pub fn init<R: Rng>(input_dim: usize, hidden_dims: &[usize], rng: &mut R) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument {
                what: "input_dim",
                details: "must be >= 1".into(),
            });
        }
        if hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument {
                what: "hidden_dims",
                details: "all hidden widths must be >= 1".into(),
            });
        }
        let mut layers = Vec::with_capacity(hidden_dims.len());
        let mut d = input_dim;
        for &h in hidden_dims {
            layers.push(AffineLayer::init(d, h, rng));
            d = h;
        }
        let classifier = AffineLayer::init(d, 2, rng);
        Ok(EmbeddingNet { layers, classifier })
    }

    /// Rebuilds a network from explicit layers (checkpoint loading). Layer
    /// dimensions must chain, and the classifier must map the embedding to 2.
    pub fn from_parts(layers: Vec<AffineLayer>, classifier: AffineLayer) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::ShapeMismatch {
                    op: "embedding_net",
                    left: pair[0].weight().shape(),
                    right: pair[1].weight().shape(),
                });
            }
        }
        if let Some(last) = layers.last() {
            if last.output_dim() != classifier.input_dim() {
                return Err(Error::ShapeMismatch {
                    op: "embedding_net",
                    left: last.weight().shape(),
                    right: classifier.weight().shape(),
                });
            }
        }
        if classifier.output_dim() != 2 {
            return Err(Error::ShapeMismatch {
                op: "embedding_net",
                left: classifier.weight().shape(),
                right: (classifier.input_dim(), 2),
            });
        }
        Ok(EmbeddingNet { layers, classifier })
    }

    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map_or(self.classifier.input_dim(), AffineLayer::input_dim)
    }

    /// Dimension of the clustered activation.
    pub fn embed_dim(&self) -> usize {
        self.classifier.input_dim()
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    pub fn classifier(&self) -> &AffineLayer {
        &self.classifier
    }

    pub fn classifier_mut(&mut self) -> &mut AffineLayer {
        &mut self.classifier
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grad();
        }
        self.classifier.zero_grad();
    }

    /// Embeds a batch without keeping intermediates.
    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = relu_forward(&layer.forward(&h)?);
        }
        Ok(h)
    }

    /// Full forward pass, retaining what the backward pass needs.
    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let pre = layer.forward(&h)?;
            inputs.push(h);
            h = relu_forward(&pre);
            pre_activations.push(pre);
        }
        let logits = self.classifier.forward(&h)?;
        Ok(ForwardCache {
            inputs,
            pre_activations,
            embedding: h,
            logits,
        })
    }

    /// Backpropagates through the classifier and the pair stack, accumulating
    /// parameter gradients.
    ///
    /// `grad_embedding` carries contributions that attach directly to the
    /// embedding (the clustering loss); `grad_logits` is the classifier-loss
    /// gradient. The gradient with respect to the network input is discarded.
    pub fn backward(
        &mut self,
        cache: &ForwardCache,
        grad_embedding: &Matrix,
        grad_logits: &Matrix,
    ) -> Result<()> {
        if grad_embedding.shape() != cache.embedding.shape() {
            return Err(Error::ShapeMismatch {
                op: "net_backward",
                left: grad_embedding.shape(),
                right: cache.embedding.shape(),
            });
        }
        let mut grad = self.classifier.backward(&cache.embedding, grad_logits)?;
        for (g, &extra) in grad.data_mut().iter_mut().zip(grad_embedding.data()) {
            *g += extra;
        }
        for (layer, (input, pre)) in self
            .layers
            .iter_mut()
            .zip(cache.inputs.iter().zip(&cache.pre_activations))
            .rev()
        {
            let through_relu = relu_backward(pre, &grad)?;
            grad = layer.backward(input, &through_relu)?;
        }
        Ok(())
    }
}
