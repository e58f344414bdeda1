#include "curvedit/train.hpp"

#include <cmath>
#include <stdexcept>

namespace curvedit {

Json TrainConfig::to_json() const {
  return Json{{"steps", steps},
              {"batch_size", batch_size},
              {"learning_rate", learning_rate},
              {"weight_decay", weight_decay},
              {"seed", seed},
              {"optimizer", optimizer == Optimizer::Sgd ? "sgd" : "adamw"},
              {"lr_schedule", schedule == Schedule::Cosine ? "cosine" : "constant"}};
}

TrainConfig TrainConfig::from_json(const Json& j) {
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  const std::string opt = j.value("optimizer", std::string("adamw"));
  if (opt == "sgd") {
    c.optimizer = Optimizer::Sgd;
  } else if (opt == "adamw") {
    c.optimizer = Optimizer::AdamW;
  } else {
    throw std::invalid_argument("TrainConfig: unknown optimizer " + opt);
  }
  const std::string sched = j.value("lr_schedule", std::string("constant"));
  if (sched == "constant") {
    c.schedule = Schedule::Constant;
  } else if (sched == "cosine") {
    c.schedule = Schedule::Cosine;
  } else {
    throw std::invalid_argument("TrainConfig: unknown lr_schedule " + sched);
  }
  if (c.steps < 1) throw std::invalid_argument("TrainConfig: steps must be >= 1");
  if (c.weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight decay must be >= 0");
  return c;
}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

class Optimizer {
public:
  Optimizer(const TrainConfig& cfg, const NamedTensors& params) : cfg_(cfg) {
    if (cfg.optimizer == TrainConfig::Optimizer::AdamW) {
      for (const auto& [name, t] : params) {
        m_.emplace_back(t.rows(), t.cols());
        v_.emplace_back(t.rows(), t.cols());
      }
    }
  }

  void step(NamedTensors& params, const NamedTensors& grads) {
    ++t_;
    double lr = cfg_.learning_rate;
    if (cfg_.schedule == TrainConfig::Schedule::Cosine && cfg_.steps > 1) {
      constexpr double kFloor = 0.05;
      const double progress =
          static_cast<double>(t_ - 1) / static_cast<double>(cfg_.steps - 1);
      lr *= kFloor + (1.0 - kFloor) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
    }
    const double wd = cfg_.weight_decay;
    if (cfg_.optimizer == TrainConfig::Optimizer::Sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& w = params[i].second;
        const Matrix& g = grads[i].second;
        for (std::size_t k = 0; k < w.size(); ++k)
          w.data()[k] -= lr * (g.data()[k] + wd * w.data()[k]);
      }
      return;
    }
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix& w = params[i].second;
      const Matrix& g = grads[i].second;
      Matrix& m = m_[i];
      Matrix& v = v_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double gk = g.data()[k];
        m.data()[k] = kAdamBeta1 * m.data()[k] + (1.0 - kAdamBeta1) * gk;
        v.data()[k] = kAdamBeta2 * v.data()[k] + (1.0 - kAdamBeta2) * gk * gk;
        const double mhat = m.data()[k] / bc1;
        const double vhat = v.data()[k] / bc2;
        w.data()[k] -= lr * (mhat / (std::sqrt(vhat) + kAdamEps) + wd * w.data()[k]);
      }
    }
  }

private:
  TrainConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

void zero_tensors(NamedTensors& t) {
  for (auto& [name, m] : t)
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = 0.0;
}

// Mean NLL above this is unambiguous divergence even when saturated
// softmaxes keep the value finite.
constexpr double kDivergedLoss = 1e8;

void check_loss(double loss, std::size_t step) {
  if (!std::isfinite(loss) || loss > kDivergedLoss) {
    throw NumericError("training diverged at step " + std::to_string(step));
  }
}

}  // namespace

TrainResult train_lm_from(ModelCheckpoint model, const LmDataset& data, const TrainConfig& cfg) {
  if (data.sequences.empty()) throw std::invalid_argument("train_lm: empty dataset");
  Rng rng(cfg.seed);
  NamedTensors grads = make_zero_checkpoint(model.arch).tensors;
  Optimizer opt(cfg, model.tensors);

  TrainResult result;
  result.loss_history.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    zero_tensors(grads);
    double loss_sum = 0.0;
    std::size_t positions = 0;
    std::vector<std::size_t> batch(cfg.batch_size);
    for (auto& idx : batch) idx = rng.next_below(data.sequences.size());
    for (std::size_t pos_count_pass = 0; pos_count_pass < batch.size(); ++pos_count_pass)
      positions += data.sequences[batch[pos_count_pass]].size() - 1;
    const double grad_scale = 1.0 / static_cast<double>(positions);
    try {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& seq = data.sequences[batch[b]];
        const LmForward fwd = lm_forward(model, seq);
        loss_sum +=
            lm_backward(model, fwd, seq, LabelMode::GroundTruth, nullptr, grad_scale, grads);
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    const double mean_loss = loss_sum / static_cast<double>(positions);
    check_loss(mean_loss, step);
    result.loss_history.push_back(mean_loss);
    opt.step(model.tensors, grads);
  }
  model.train_meta = {cfg.steps, cfg.seed, cfg.weight_decay, cfg.learning_rate};
  result.checkpoint = std::move(model);
  return result;
}

TrainResult train_lm(const ArchSpec& arch, const LmDataset& data, const TrainConfig& cfg) {
  ModelCheckpoint model = make_zero_checkpoint(arch);
  Rng init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  init_weights(model, init_rng);
  return train_lm_from(std::move(model), data, cfg);
}

TrainResult train_classifier(const ArchSpec& arch, const ClassifierDataset& data,
                             const TrainConfig& cfg) {
  if (data.x.rows() == 0) throw std::invalid_argument("train_classifier: empty dataset");
  if (data.x.rows() != data.labels.size())
    throw DimensionError("train_classifier: labels/features row mismatch");

  ModelCheckpoint model = make_zero_checkpoint(arch);
  Rng init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  init_weights(model, init_rng);

  Rng rng(cfg.seed);
  NamedTensors grads = make_zero_checkpoint(arch).tensors;
  Optimizer opt(cfg, model.tensors);

  TrainResult result;
  result.loss_history.reserve(cfg.steps);
  Matrix xb(cfg.batch_size, arch.input_dim);
  std::vector<int> yb(cfg.batch_size);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = rng.next_below(data.x.rows());
      for (std::size_t c = 0; c < arch.input_dim; ++c) xb(b, c) = data.x(idx, c);
      yb[b] = data.labels[idx];
    }
    zero_tensors(grads);
    const double grad_scale = 1.0 / static_cast<double>(cfg.batch_size);
    double loss = 0.0;
    try {
      const ClassifierForward fwd = classifier_forward(model, xb);
      loss = classifier_backward(model, fwd, xb, yb, LabelMode::GroundTruth, nullptr, grad_scale,
                                 grads) /
             static_cast<double>(cfg.batch_size);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    check_loss(loss, step);
    result.loss_history.push_back(loss);
    opt.step(model.tensors, grads);
  }
  model.train_meta = {cfg.steps, cfg.seed, cfg.weight_decay, cfg.learning_rate};
  result.checkpoint = std::move(model);
  return result;
}

}  // namespace curvedit
