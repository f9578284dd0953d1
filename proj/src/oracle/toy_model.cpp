#include "mixq/oracle/toy_model.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "mixq/core/errors.hpp"
#include "mixq/core/rng.hpp"

namespace mixq::oracle {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Mat>;

Mat broadcast_sum(const std::vector<const Mat*>& in) {
  Eigen::Index rows = 1;
  for (const auto* m : in) rows = std::max(rows, m->rows());
  Mat out = Mat::Zero(rows, in.front()->cols());
  for (const auto* m : in) {
    if (m->cols() != out.cols()) throw DataError("toy model: width mismatch between inputs");
    if (m->rows() == rows) {
      out += *m;
    } else if (m->rows() == 1) {
      out.rowwise() += m->row(0);
    } else {
      throw DataError("toy model: incompatible row counts");
    }
  }
  return out;
}

struct Evaluator {
  const graph::NetGraph& g;
  const std::vector<const std::vector<double>*>& w;

  // Runs the graph on one sample. If `stop_at` is set, returns the (activated)
  // input of that linear node instead of the network output.
  Mat run(const TaskSample& s, std::size_t tokens, std::size_t caption, std::size_t output,
          std::optional<std::size_t> stop_at = {}) const {
    std::vector<Mat> val(g.size());
    for (auto v : g.topo_order()) {
      const auto& n = g.node(v);
      const auto& preds = g.preds(v);
      std::vector<const Mat*> in;
      for (auto p : preds) in.push_back(&val[p]);
      switch (n.compute) {
        case graph::Compute::Input: {
          const std::vector<double>* src = n.id == "x_in" ? &s.x : n.id == "t_in" ? &s.t : &s.c;
          const std::size_t rows = n.id == "x_in" ? tokens : n.id == "t_in" ? 1 : caption;
          val[v] = ConstMap(src->data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n.out_dim));
          break;
        }
        case graph::Compute::Linear: {
          Mat x = broadcast_sum(in);
          if (n.relu_input) x = x.cwiseMax(0.0);
          if (stop_at && *stop_at == v) return x;
          const auto slot = static_cast<std::size_t>(g.weight_slot(v));
          ConstMap W(w[slot]->data(), static_cast<Eigen::Index>(n.out_dim), x.cols());
          val[v] = x * W.transpose();
          break;
        }
        case graph::Compute::Add:
          val[v] = broadcast_sum(in);
          break;
        case graph::Compute::AttnScores: {
          const Mat& q = *in.at(0);
          const Mat& k = *in.at(1);
          Mat sc = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
          for (Eigen::Index r = 0; r < sc.rows(); ++r) {
            const double m = sc.row(r).maxCoeff();
            sc.row(r) = (sc.row(r).array() - m).exp().matrix();
            sc.row(r) /= sc.row(r).sum();
          }
          val[v] = std::move(sc);
          break;
        }
        case graph::Compute::AttnApply:
          val[v] = *in.at(0) * *in.at(1);
          break;
        case graph::Compute::Norm: {
          Mat x = *in.at(0);
          for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double mean = x.row(r).mean();
            x.row(r).array() -= mean;
            const double var = x.row(r).squaredNorm() / static_cast<double>(x.cols());
            x.row(r) /= std::sqrt(var + 1e-5);
          }
          std::vector<const Mat*> rest{&x};
          for (std::size_t i = 1; i < in.size(); ++i) rest.push_back(in[i]);
          val[v] = broadcast_sum(rest);
          break;
        }
      }
    }
    return val[output];
  }
};

std::vector<double> normals(CounterRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

TaskSample draw_inputs(CounterRng& rng, std::size_t d, const ToyModelOptions& o) {
  TaskSample s;
  s.x = normals(rng, o.tokens * d);
  s.t = normals(rng, d);
  s.c = normals(rng, o.caption_tokens * d);
  return s;
}

std::size_t find_output(const graph::NetGraph& g) {
  std::optional<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.succs(i).empty() && g.node(i).is_weight()) out = i;
  if (!out) throw DataError("toy model: graph has no weight-layer sink");
  return *out;
}

// Heavy-tailed weights: per-channel log-normal scale, occasional 5x outliers.
quant::WeightTensor draw_weights(CounterRng& rng, std::size_t rows, std::size_t cols, const std::string& id) {
  std::vector<double> v(rows * cols);
  const double base = 1.0 / std::sqrt(static_cast<double>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = base * std::exp(0.5 * rng.normal());
    for (std::size_t c = 0; c < cols; ++c) {
      double z = rng.normal();
      if (rng.uniform() < 0.02) z *= 5.0;
      v[r * cols + c] = s * z;
    }
  }
  return quant::WeightTensor(std::move(v), rows, cols, 16, id);
}

std::vector<const std::vector<double>*> fp_pointers(const std::vector<std::vector<double>>& w) {
  std::vector<const std::vector<double>*> p;
  for (const auto& x : w) p.push_back(&x);
  return p;
}

}  // namespace

double ToyModel::loss_with(const std::vector<const std::vector<double>*>& slot_weights) const {
  if (slot_weights.size() != weights.size()) throw DataError("toy model: wrong number of weight tensors");
  Evaluator ev{*graph, slot_weights};
  double sse = 0.0;
  std::size_t count = 0;
  for (const auto& s : eval_set) {
    const Mat out = ev.run(s, options.tokens, options.caption_tokens, output_);
    ConstMap y(s.y.data(), out.rows(), out.cols());
    sse += (out - y).squaredNorm();
    count += static_cast<std::size_t>(out.size());
  }
  return sse / static_cast<double>(count);
}

double ToyModel::full_precision_loss() const {
  std::vector<std::vector<double>> copies;
  copies.reserve(weights.size());
  for (const auto& w : weights) copies.emplace_back(w.values().begin(), w.values().end());
  return loss_with(fp_pointers(copies));
}

double ToyModel::config_loss(const graph::QuantConfig& config) const {
  if (config.choices.size() != weights.size()) throw DataError("config does not cover all weight nodes");
  std::vector<const std::vector<double>*> p(weights.size());
  std::vector<double> planted;
  for (std::size_t s = 0; s < weights.size(); ++s) {
    const auto& dq = table.outcome(s, config.choices[s].index()).dq;
    if (planted_slot && *planted_slot == s && planted_gain != 1.0) {
      const auto w = weights[s].values();
      planted.resize(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) planted[i] = w[i] + planted_gain * (dq[i] - w[i]);
      p[s] = &planted;
    } else {
      p[s] = &dq;
    }
  }
  return loss_with(p);
}

ToyModel build_toy_model(std::string_view family, const graph::FamilyParams& params, std::uint64_t seed,
                         const ToyModelOptions& options) {
  if (options.tokens < 1 || options.caption_tokens < 1 || options.eval_samples < 1 || options.fit_samples < 1)
    throw UsageError("toy model: token and sample counts must be positive");
  auto built = graph::build_graph(family, params, seed);
  ToyModel m;
  m.graph = std::make_shared<const graph::NetGraph>(std::move(built.graph));
  m.catalog = std::move(built.catalog);
  m.params = params;
  m.seed = seed;
  m.options = options;
  const auto& g = *m.graph;
  m.output_ = find_output(g);
  const std::size_t d = params.width;
  const auto& wn = g.weight_nodes();

  constexpr int kAttempts = 8;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const CounterRng root(seed, static_cast<std::uint64_t>(attempt));
    CounterRng wr = root.substream(1), fr = root.substream(2), er = root.substream(3), nr = root.substream(4);
    m.weights.clear();
    for (auto v : wn) m.weights.push_back(draw_weights(wr, g.node(v).out_dim, g.in_dim(v), g.node(v).id));

    std::vector<TaskSample> fit(options.fit_samples), eval(options.eval_samples);
    for (auto& s : fit) s = draw_inputs(fr, d, options);
    for (auto& s : eval) s = draw_inputs(er, d, options);

    std::vector<std::vector<double>> w;
    for (const auto& t : m.weights) w.emplace_back(t.values().begin(), t.values().end());
    auto ptrs = fp_pointers(w);
    Evaluator ev{g, ptrs};

    // Frozen task: full-precision outputs plus label noise.
    std::vector<Mat> fit_out, eval_out;
    double sq = 0.0;
    std::size_t cnt = 0;
    for (const auto& s : fit) {
      fit_out.push_back(ev.run(s, options.tokens, options.caption_tokens, m.output_));
      sq += fit_out.back().squaredNorm();
      cnt += static_cast<std::size_t>(fit_out.back().size());
    }
    for (const auto& s : eval) eval_out.push_back(ev.run(s, options.tokens, options.caption_tokens, m.output_));
    const double rms = std::sqrt(sq / static_cast<double>(cnt));
    if (!std::isfinite(rms) || rms == 0.0) continue;
    auto label = [&](TaskSample& s, const Mat& out) {
      s.y.resize(static_cast<std::size_t>(out.size()));
      for (std::size_t i = 0; i < s.y.size(); ++i) s.y[i] = out.data()[i] + options.label_noise * rms * nr.normal();
    };
    for (std::size_t i = 0; i < fit.size(); ++i) label(fit[i], fit_out[i]);
    for (std::size_t i = 0; i < eval.size(); ++i) label(eval[i], eval_out[i]);

    // Ridge refit of the output layer on the fit set.
    const auto out_slot = static_cast<std::size_t>(g.weight_slot(m.output_));
    const auto in_w = static_cast<Eigen::Index>(g.in_dim(m.output_));
    const auto out_w = static_cast<Eigen::Index>(g.node(m.output_).out_dim);
    Mat ftf = Mat::Zero(in_w, in_w), fty = Mat::Zero(in_w, out_w);
    double rows = 0.0;
    for (const auto& s : fit) {
      const Mat f = ev.run(s, options.tokens, options.caption_tokens, m.output_, m.output_);
      ConstMap y(s.y.data(), f.rows(), out_w);
      ftf += f.transpose() * f;
      fty += f.transpose() * y;
      rows += static_cast<double>(f.rows());
    }
    ftf.diagonal().array() += options.ridge * rows;
    const Mat wt = ftf.ldlt().solve(fty);  // [in, out]
    const Mat wout = wt.transpose();
    std::vector<double> refit(wout.data(), wout.data() + wout.size());
    m.weights[out_slot] = quant::WeightTensor(std::move(refit), static_cast<std::size_t>(out_w),
                                              static_cast<std::size_t>(in_w), 16, g.node(m.output_).id);

    m.eval_set = std::move(eval);
    m.baseline_loss = m.full_precision_loss();
    if (!std::isfinite(m.baseline_loss)) continue;
    m.table = graph::QuantTable(g, m.weights, options.p_norm);
    return m;
  }
  throw NumericError("toy model: no finite baseline after reseeding");
}

ToyModel plant_sensitivity(const ToyModel& model, const PlantSpec& plant) {
  if (!model.graph->contains(plant.node_id)) throw DataError("plant: unknown node '" + plant.node_id + "'");
  const auto v = model.graph->index_of(plant.node_id);
  if (!model.graph->node(v).is_weight()) throw DataError("plant: '" + plant.node_id + "' is not a weight node");
  if (!(plant.gain >= 1.0) || !std::isfinite(plant.gain)) throw UsageError("plant: gain must be >= 1");
  ToyModel m = model;
  m.planted_slot = static_cast<std::size_t>(model.graph->weight_slot(v));
  m.planted_gain = plant.gain;
  return m;
}

}  // namespace mixq::oracle
