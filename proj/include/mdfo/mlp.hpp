#ifndef MDFO_MLP_HPP
#define MDFO_MLP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mdfo/linalg.hpp"
#include "mdfo/rng.hpp"

namespace mdfo {

enum class Activation { kReLU, kIdentity };

/// Layer sizes plus the activation applied after each linear layer.
struct MlpSpec {
  std::vector<int> layer_dims;              // [in, h1, ..., out]
  std::vector<Activation> activations;      // one per linear layer

  int num_layers() const { return static_cast<int>(activations.size()); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t param_count() const;
  /// Offset of layer l's weights in the flat parameter array; biases follow
  /// the row-major weights.
  std::size_t layer_offset(int l) const;
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

/// Encoder for inputs below the wide-input threshold:
/// Linear(d,2n) -> ReLU -> Linear(2n,n) -> ReLU -> Linear(n,n).
/// Above it, one extra halving layer is prepended.
MlpSpec standard_encoder_spec(int d, int n);
/// Head: Linear(n,n) -> ReLU -> Linear(n,1).
MlpSpec standard_head_spec(int n);
/// Generator network for synthetic problems: Linear(d,2n) -> ReLU -> Linear(2n,n).
MlpSpec planted_encoder_spec(int d, int n);

/// A multilayer perceptron with parameters in one flat array.
/// Layout per layer: weights row-major (out x in), then biases; layers
/// concatenated in order. Checkpoints rely on this layout.
struct Mlp {
  MlpSpec spec;
  std::vector<double> params;

  const double* weights(int l) const { return params.data() + spec.layer_offset(l); }
  const double* biases(int l) const {
    const int in = spec.layer_dims[static_cast<std::size_t>(l)];
    const int out = spec.layer_dims[static_cast<std::size_t>(l) + 1];
    return params.data() + spec.layer_offset(l) + static_cast<std::size_t>(in) * out;
  }
};

Mlp make_mlp(const MlpSpec& spec);
/// All weights and biases i.i.d. standard normal.
Mlp init_mlp_standard_normal(const MlpSpec& spec, RngStream& rng);

Vec mlp_forward(const Mlp& net, const Vec& x);
/// d(output)/d(input), output_dim x input_dim.
Mat mlp_input_jacobian(const Mlp& net, const Vec& x);

/// Encoder r: R^d -> R^n composed with scalar head g: R^n -> R.
struct ManifoldModel {
  Mlp encoder;  // parameters theta
  Mlp head;     // parameters psi
};

ManifoldModel init_standard_normal(const MlpSpec& encoder_spec,
                                   const MlpSpec& head_spec, RngStream& rng);

struct ForwardResult {
  Vec latent;    // r(x)
  double value;  // g(r(x))
};

/// Scratch buffers for the differentiation passes. One instance per loop
/// (or per thread) avoids reallocation in the hot path; all entry points
/// below also work with a fresh instance.
struct DiffWork {
  std::vector<Vec> a;   // activations, a[0] = x
  std::vector<Vec> z;   // pre-activations per layer
  std::vector<Vec> ta;  // input tangents of activations
  std::vector<Vec> tz;  // input tangents of pre-activations
};

ForwardResult forward(const ManifoldModel& model, const Vec& x);

/// Jacobian of the encoder alone: n x d. Search directions are lifted
/// through this matrix, never through the head.
Mat input_jacobian(const ManifoldModel& model, const Vec& x);

/// Gradient of the composed scalar model wrt the input (one reverse pass).
Vec input_gradient(const ManifoldModel& model, const Vec& x);
Vec input_gradient(const ManifoldModel& model, const Vec& x, DiffWork& work);

/// u^T grad_x g(r(x)) via one forward-mode tangent pass.
double directional_derivative(const ManifoldModel& model, const Vec& x, const Vec& u);
double directional_derivative(const ManifoldModel& model, const Vec& x, const Vec& u,
                              DiffWork& work);

struct ParamGrad {
  std::vector<double> d_theta;
  std::vector<double> d_psi;
};

/// Gradient of directional_derivative(model, x, u) wrt all parameters:
/// reverse-mode through the forward-mode tangent computation.
ParamGrad param_grad_of_directional_derivative(const ManifoldModel& model, const Vec& x,
                                               const Vec& u);
/// In-place variant accumulating into (d_theta, d_psi) scaled by coeff.
void accumulate_param_grad_of_directional_derivative(const ManifoldModel& model,
                                                     const Vec& x, const Vec& u,
                                                     double coeff, DiffWork& work,
                                                     double* d_theta, double* d_psi);

/// Checkpoint round-trip: JSON object {spec, theta, psi, rng_state}.
struct RngState {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t counter = 0;
};

std::string model_to_json(const ManifoldModel& model, const RngState& rng_state);
ManifoldModel model_from_json(const std::string& text, RngState* rng_state = nullptr);

}  // namespace mdfo

#endif  // MDFO_MLP_HPP
