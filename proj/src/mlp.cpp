#include "mdfo/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace mdfo {

namespace {

struct LayerView {
  const double* w;  // out x in, row-major
  const double* b;  // out
  int in;
  int out;
  Activation act;
};

std::vector<LayerView> chain_of(const Mlp& net) {
  std::vector<LayerView> chain;
  chain.reserve(static_cast<std::size_t>(net.spec.num_layers()));
  for (int l = 0; l < net.spec.num_layers(); ++l) {
    chain.push_back({net.weights(l), net.biases(l),
                     net.spec.layer_dims[static_cast<std::size_t>(l)],
                     net.spec.layer_dims[static_cast<std::size_t>(l) + 1],
                     net.spec.activations[static_cast<std::size_t>(l)]});
  }
  return chain;
}

std::vector<LayerView> chain_of(const ManifoldModel& model) {
  std::vector<LayerView> chain = chain_of(model.encoder);
  std::vector<LayerView> head = chain_of(model.head);
  chain.insert(chain.end(), head.begin(), head.end());
  return chain;
}

double act_deriv(Activation act, double z) {
  // ReLU' at exactly 0 is 0; forward and tangent passes must agree on this.
  if (act == Activation::kReLU) return z > 0.0 ? 1.0 : 0.0;
  return 1.0;
}

double act_apply(Activation act, double z) {
  if (act == Activation::kReLU) return z > 0.0 ? z : 0.0;
  return z;
}

void ensure_work(DiffWork& work, const std::vector<LayerView>& chain) {
  const std::size_t layers = chain.size();
  work.a.resize(layers + 1);
  work.z.resize(layers);
  work.ta.resize(layers + 1);
  work.tz.resize(layers);
}

// Primal pass: work.a[l], work.z[l] filled for the whole chain.
void chain_forward(const std::vector<LayerView>& chain, const Vec& x, DiffWork& work) {
  ensure_work(work, chain);
  work.a[0] = x;
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const LayerView& ly = chain[l];
    Vec& z = work.z[l];
    z.assign(static_cast<std::size_t>(ly.out), 0.0);
    const Vec& a = work.a[l];
    for (int i = 0; i < ly.out; ++i) {
      const double* row = ly.w + static_cast<std::size_t>(i) * ly.in;
      double acc = ly.b[i];
      for (int j = 0; j < ly.in; ++j) acc += row[j] * a[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = acc;
    }
    Vec& out = work.a[l + 1];
    out.resize(static_cast<std::size_t>(ly.out));
    for (int i = 0; i < ly.out; ++i)
      out[static_cast<std::size_t>(i)] = act_apply(ly.act, z[static_cast<std::size_t>(i)]);
  }
}

// Tangent pass on top of a completed primal pass; work.ta[0] = u.
void chain_tangent(const std::vector<LayerView>& chain, const Vec& u, DiffWork& work) {
  work.ta[0] = u;
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const LayerView& ly = chain[l];
    Vec& tz = work.tz[l];
    tz.assign(static_cast<std::size_t>(ly.out), 0.0);
    const Vec& ta = work.ta[l];
    for (int i = 0; i < ly.out; ++i) {
      const double* row = ly.w + static_cast<std::size_t>(i) * ly.in;
      double acc = 0.0;
      for (int j = 0; j < ly.in; ++j) acc += row[j] * ta[static_cast<std::size_t>(j)];
      tz[static_cast<std::size_t>(i)] = acc;
    }
    Vec& tout = work.ta[l + 1];
    tout.resize(static_cast<std::size_t>(ly.out));
    for (int i = 0; i < ly.out; ++i)
      tout[static_cast<std::size_t>(i)] =
          act_deriv(ly.act, work.z[l][static_cast<std::size_t>(i)]) *
          tz[static_cast<std::size_t>(i)];
  }
}

void check_scalar_chain(const std::vector<LayerView>& chain) {
  if (chain.empty() || chain.back().out != 1)
    throw std::invalid_argument("expected a scalar-output model");
}

// Reverse pass wrt the input for a scalar chain; needs a completed primal pass.
Vec chain_input_gradient(const std::vector<LayerView>& chain, DiffWork& work) {
  check_scalar_chain(chain);
  Vec abar{1.0};
  for (int l = static_cast<int>(chain.size()) - 1; l >= 0; --l) {
    const LayerView& ly = chain[static_cast<std::size_t>(l)];
    const Vec& z = work.z[static_cast<std::size_t>(l)];
    Vec zbar(static_cast<std::size_t>(ly.out));
    for (int i = 0; i < ly.out; ++i)
      zbar[static_cast<std::size_t>(i)] =
          abar[static_cast<std::size_t>(i)] * act_deriv(ly.act, z[static_cast<std::size_t>(i)]);
    Vec prev(static_cast<std::size_t>(ly.in), 0.0);
    for (int i = 0; i < ly.out; ++i) {
      const double* row = ly.w + static_cast<std::size_t>(i) * ly.in;
      const double zi = zbar[static_cast<std::size_t>(i)];
      for (int j = 0; j < ly.in; ++j) prev[static_cast<std::size_t>(j)] += row[j] * zi;
    }
    abar = std::move(prev);
  }
  return abar;
}

// Reverse-over-forward: accumulates coeff * d/dparams of the tangent output
// into grads[l] (each sized out*in+out, laid out like the parameter array).
// Adjoint recursion, with zbar wrt z[l] and tzbar wrt tz[l]:
//   zbar  = abar(l+1) .* act'(z)      (act'' vanishes for ReLU/identity)
//   tzbar = tabar(l+1) .* act'(z)
//   dW   += zbar a^T + tzbar ta^T,  db += zbar
//   abar(l) = W^T zbar,  tabar(l) = W^T tzbar
void chain_param_grad_of_tangent(const std::vector<LayerView>& chain, double coeff,
                                 DiffWork& work, const std::vector<double*>& grads) {
  check_scalar_chain(chain);
  Vec abar{0.0};
  Vec tabar{1.0};
  for (int l = static_cast<int>(chain.size()) - 1; l >= 0; --l) {
    const LayerView& ly = chain[static_cast<std::size_t>(l)];
    const Vec& z = work.z[static_cast<std::size_t>(l)];
    const Vec& a = work.a[static_cast<std::size_t>(l)];
    const Vec& ta = work.ta[static_cast<std::size_t>(l)];
    Vec zbar(static_cast<std::size_t>(ly.out));
    Vec tzbar(static_cast<std::size_t>(ly.out));
    for (int i = 0; i < ly.out; ++i) {
      const double d = act_deriv(ly.act, z[static_cast<std::size_t>(i)]);
      zbar[static_cast<std::size_t>(i)] = abar[static_cast<std::size_t>(i)] * d;
      tzbar[static_cast<std::size_t>(i)] = tabar[static_cast<std::size_t>(i)] * d;
    }
    double* dw = grads[static_cast<std::size_t>(l)];
    double* db = dw + static_cast<std::size_t>(ly.out) * ly.in;
    for (int i = 0; i < ly.out; ++i) {
      double* dwrow = dw + static_cast<std::size_t>(i) * ly.in;
      const double zi = zbar[static_cast<std::size_t>(i)];
      const double tzi = tzbar[static_cast<std::size_t>(i)];
      for (int j = 0; j < ly.in; ++j)
        dwrow[j] += coeff * (zi * a[static_cast<std::size_t>(j)] +
                             tzi * ta[static_cast<std::size_t>(j)]);
      db[i] += coeff * zi;
    }
    Vec abar_prev(static_cast<std::size_t>(ly.in), 0.0);
    Vec tabar_prev(static_cast<std::size_t>(ly.in), 0.0);
    for (int i = 0; i < ly.out; ++i) {
      const double* row = ly.w + static_cast<std::size_t>(i) * ly.in;
      const double zi = zbar[static_cast<std::size_t>(i)];
      const double tzi = tzbar[static_cast<std::size_t>(i)];
      for (int j = 0; j < ly.in; ++j) {
        abar_prev[static_cast<std::size_t>(j)] += row[j] * zi;
        tabar_prev[static_cast<std::size_t>(j)] += row[j] * tzi;
      }
    }
    abar = std::move(abar_prev);
    tabar = std::move(tabar_prev);
  }
}

void check_input(const MlpSpec& spec, const Vec& x) {
  if (static_cast<int>(x.size()) != spec.input_dim())
    throw std::invalid_argument("input dimension mismatch");
}

void check_output_finite(const Vec& v) {
  if (!all_finite(v)) throw std::runtime_error("non-finite value in model evaluation");
}

}  // namespace

std::size_t MlpSpec::param_count() const {
  std::size_t total = 0;
  for (int l = 0; l < num_layers(); ++l) {
    const std::size_t in = static_cast<std::size_t>(layer_dims[static_cast<std::size_t>(l)]);
    const std::size_t out = static_cast<std::size_t>(layer_dims[static_cast<std::size_t>(l) + 1]);
    total += in * out + out;
  }
  return total;
}

std::size_t MlpSpec::layer_offset(int l) const {
  std::size_t off = 0;
  for (int k = 0; k < l; ++k) {
    const std::size_t in = static_cast<std::size_t>(layer_dims[static_cast<std::size_t>(k)]);
    const std::size_t out = static_cast<std::size_t>(layer_dims[static_cast<std::size_t>(k) + 1]);
    off += in * out + out;
  }
  return off;
}

void MlpSpec::validate() const {
  if (layer_dims.size() < 2) throw std::invalid_argument("MlpSpec: need at least one layer");
  if (activations.size() != layer_dims.size() - 1)
    throw std::invalid_argument("MlpSpec: one activation per linear layer");
  for (int d : layer_dims)
    if (d < 1) throw std::invalid_argument("MlpSpec: layer dims must be positive");
}

MlpSpec standard_encoder_spec(int d, int n) {
  MlpSpec spec;
  if (d <= 1000) {
    spec.layer_dims = {d, 2 * n, n, n};
    spec.activations = {Activation::kReLU, Activation::kReLU, Activation::kIdentity};
  } else {
    spec.layer_dims = {d, d / 2, 2 * n, n, n};
    spec.activations = {Activation::kReLU, Activation::kReLU, Activation::kReLU,
                        Activation::kIdentity};
  }
  return spec;
}

MlpSpec standard_head_spec(int n) {
  MlpSpec spec;
  spec.layer_dims = {n, n, 1};
  spec.activations = {Activation::kReLU, Activation::kIdentity};
  return spec;
}

MlpSpec planted_encoder_spec(int d, int n) {
  MlpSpec spec;
  spec.layer_dims = {d, 2 * n, n};
  spec.activations = {Activation::kReLU, Activation::kIdentity};
  return spec;
}

Mlp make_mlp(const MlpSpec& spec) {
  spec.validate();
  Mlp net;
  net.spec = spec;
  net.params.assign(spec.param_count(), 0.0);
  return net;
}

Mlp init_mlp_standard_normal(const MlpSpec& spec, RngStream& rng) {
  Mlp net = make_mlp(spec);
  for (double& p : net.params) p = rng.next_gaussian();
  return net;
}

Vec mlp_forward(const Mlp& net, const Vec& x) {
  check_input(net.spec, x);
  DiffWork work;
  chain_forward(chain_of(net), x, work);
  check_output_finite(work.a.back());
  return work.a.back();
}

Mat mlp_input_jacobian(const Mlp& net, const Vec& x) {
  check_input(net.spec, x);
  DiffWork work;
  const std::vector<LayerView> chain = chain_of(net);
  chain_forward(chain, x, work);
  // Forward matrix sweep: J <- act'(z_l) .rows (W_l J), starting from W_0.
  const int d = net.spec.input_dim();
  Mat jac(chain[0].out, d);
  for (int i = 0; i < chain[0].out; ++i)
    for (int j = 0; j < d; ++j)
      jac.at(i, j) = chain[0].w[static_cast<std::size_t>(i) * d + j];
  for (int i = 0; i < chain[0].out; ++i) {
    const double dv = act_deriv(chain[0].act, work.z[0][static_cast<std::size_t>(i)]);
    for (int j = 0; j < d; ++j) jac.at(i, j) *= dv;
  }
  for (std::size_t l = 1; l < chain.size(); ++l) {
    const LayerView& ly = chain[l];
    Mat next(ly.out, d);
    for (int i = 0; i < ly.out; ++i) {
      const double* row = ly.w + static_cast<std::size_t>(i) * ly.in;
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int k = 0; k < ly.in; ++k) acc += row[k] * jac.at(k, j);
        next.at(i, j) = acc;
      }
      const double dv = act_deriv(ly.act, work.z[l][static_cast<std::size_t>(i)]);
      for (int j = 0; j < d; ++j) next.at(i, j) *= dv;
    }
    jac = std::move(next);
  }
  if (!all_finite(jac.data)) throw std::runtime_error("non-finite jacobian");
  return jac;
}

ManifoldModel init_standard_normal(const MlpSpec& encoder_spec, const MlpSpec& head_spec,
                                   RngStream& rng) {
  if (encoder_spec.output_dim() != head_spec.input_dim())
    throw std::invalid_argument("encoder output and head input dims must match");
  if (head_spec.output_dim() != 1)
    throw std::invalid_argument("head must be scalar-valued");
  ManifoldModel model;
  model.encoder = init_mlp_standard_normal(encoder_spec, rng);
  model.head = init_mlp_standard_normal(head_spec, rng);
  return model;
}

ForwardResult forward(const ManifoldModel& model, const Vec& x) {
  check_input(model.encoder.spec, x);
  DiffWork work;
  chain_forward(chain_of(model), x, work);
  ForwardResult out;
  const std::size_t enc_layers = static_cast<std::size_t>(model.encoder.spec.num_layers());
  out.latent = work.a[enc_layers];
  out.value = work.a.back()[0];
  check_output_finite(out.latent);
  if (!std::isfinite(out.value)) throw std::runtime_error("non-finite model value");
  return out;
}

Mat input_jacobian(const ManifoldModel& model, const Vec& x) {
  return mlp_input_jacobian(model.encoder, x);
}

Vec input_gradient(const ManifoldModel& model, const Vec& x, DiffWork& work) {
  check_input(model.encoder.spec, x);
  const std::vector<LayerView> chain = chain_of(model);
  chain_forward(chain, x, work);
  Vec g = chain_input_gradient(chain, work);
  check_output_finite(g);
  return g;
}

Vec input_gradient(const ManifoldModel& model, const Vec& x) {
  DiffWork work;
  return input_gradient(model, x, work);
}

double directional_derivative(const ManifoldModel& model, const Vec& x, const Vec& u,
                              DiffWork& work) {
  check_input(model.encoder.spec, x);
  if (u.size() != x.size()) throw std::invalid_argument("direction dimension mismatch");
  const std::vector<LayerView> chain = chain_of(model);
  chain_forward(chain, x, work);
  chain_tangent(chain, u, work);
  const double out = work.ta.back()[0];
  if (!std::isfinite(out)) throw std::runtime_error("non-finite directional derivative");
  return out;
}

double directional_derivative(const ManifoldModel& model, const Vec& x, const Vec& u) {
  DiffWork work;
  return directional_derivative(model, x, u, work);
}

void accumulate_param_grad_of_directional_derivative(const ManifoldModel& model,
                                                     const Vec& x, const Vec& u,
                                                     double coeff, DiffWork& work,
                                                     double* d_theta, double* d_psi) {
  check_input(model.encoder.spec, x);
  const std::vector<LayerView> chain = chain_of(model);
  chain_forward(chain, x, work);
  chain_tangent(chain, u, work);
  std::vector<double*> grads;
  grads.reserve(chain.size());
  for (int l = 0; l < model.encoder.spec.num_layers(); ++l)
    grads.push_back(d_theta + model.encoder.spec.layer_offset(l));
  for (int l = 0; l < model.head.spec.num_layers(); ++l)
    grads.push_back(d_psi + model.head.spec.layer_offset(l));
  chain_param_grad_of_tangent(chain, coeff, work, grads);
}

ParamGrad param_grad_of_directional_derivative(const ManifoldModel& model, const Vec& x,
                                               const Vec& u) {
  ParamGrad grad;
  grad.d_theta.assign(model.encoder.params.size(), 0.0);
  grad.d_psi.assign(model.head.params.size(), 0.0);
  DiffWork work;
  accumulate_param_grad_of_directional_derivative(model, x, u, 1.0, work,
                                                  grad.d_theta.data(), grad.d_psi.data());
  return grad;
}

namespace {

nlohmann::json spec_to_json(const MlpSpec& spec) {
  nlohmann::json j;
  j["layer_dims"] = spec.layer_dims;
  std::vector<std::string> acts;
  for (Activation a : spec.activations)
    acts.push_back(a == Activation::kReLU ? "relu" : "identity");
  j["activations"] = acts;
  return j;
}

MlpSpec spec_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  for (const auto& name : j.at("activations")) {
    const std::string s = name.get<std::string>();
    if (s == "relu") {
      spec.activations.push_back(Activation::kReLU);
    } else if (s == "identity") {
      spec.activations.push_back(Activation::kIdentity);
    } else {
      throw std::invalid_argument("unknown activation: " + s);
    }
  }
  spec.validate();
  return spec;
}

}  // namespace

std::string model_to_json(const ManifoldModel& model, const RngState& rng_state) {
  nlohmann::json j;
  j["spec"]["encoder"] = spec_to_json(model.encoder.spec);
  j["spec"]["head"] = spec_to_json(model.head.spec);
  j["theta"] = model.encoder.params;
  j["psi"] = model.head.params;
  j["rng_state"] = {{"master_seed", rng_state.master_seed},
                    {"stream_id", rng_state.stream_id},
                    {"counter", rng_state.counter}};
  return j.dump(2);
}

ManifoldModel model_from_json(const std::string& text, RngState* rng_state) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ManifoldModel model;
  model.encoder = make_mlp(spec_from_json(j.at("spec").at("encoder")));
  model.head = make_mlp(spec_from_json(j.at("spec").at("head")));
  const auto theta = j.at("theta").get<std::vector<double>>();
  const auto psi = j.at("psi").get<std::vector<double>>();
  if (theta.size() != model.encoder.params.size() || psi.size() != model.head.params.size())
    throw std::invalid_argument("checkpoint parameter count mismatch");
  model.encoder.params = theta;
  model.head.params = psi;
  if (rng_state != nullptr && j.contains("rng_state")) {
    rng_state->master_seed = j["rng_state"].at("master_seed").get<std::uint64_t>();
    rng_state->stream_id = j["rng_state"].at("stream_id").get<std::uint64_t>();
    rng_state->counter = j["rng_state"].at("counter").get<std::uint64_t>();
  }
  return model;
}

}  // namespace mdfo
