#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/bcq/classifier.hpp"
#include "bcqforge/ope/wis.hpp"

namespace bcqforge::ope {

/// Classification baseline search spaces, row names as published.
struct BaselineGrids {
  std::vector<double> lr_inverse_regularization{1e-3, 1e-2, 1e-1, 1, 10, 100, 1000};
  std::vector<std::size_t> mlp_hidden{16, 32, 64, 128, 256, 512};
  std::vector<std::size_t> mlp_batch{8, 16, 32, 64, 128, 256};
  std::vector<std::string> mlp_activation{"ReLU", "tanh", "Sigmoid"};
  std::vector<std::string> mlp_optimizer{"SGD", "Adam"};
  std::vector<double> mlp_learning_rate{1e-4, 1e-3, 1e-2, 1e-1};

  nlohmann::json to_json() const {
    return {{"LR", {{"Inverse of regularization strength", lr_inverse_regularization}}},
            {"MLP",
             {{"Hidden layer size", mlp_hidden},
              {"Batch size", mlp_batch},
              {"Activation function", mlp_activation},
              {"Optimizer", mlp_optimizer},
              {"Learning rate", mlp_learning_rate}}}};
  }
};

enum class BaselineKind { lr, mlp };

inline BaselineKind parse_baseline(const std::string& s) {
  if (s == "lr" || s == "LR") return BaselineKind::lr;
  if (s == "mlp" || s == "MLP") return BaselineKind::mlp;
  throw ConfigError("unknown baseline: " + s);
}

/// Activation names in the grid use the published capitalization.
inline nn::Activation grid_activation(const std::string& s) {
  if (s == "ReLU" || s == "relu") return nn::Activation::relu;
  if (s == "tanh") return nn::Activation::tanh;
  if (s == "Sigmoid" || s == "sigmoid") return nn::Activation::sigmoid;
  throw ConfigError("unknown activation: " + s);
}

struct BaselineResult {
  BaselineKind kind = BaselineKind::lr;
  bcq::ClassifierConfig config;
  double train_loss = 0.0;
  double test_accuracy = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"kind", kind == BaselineKind::lr ? "LR" : "MLP"}, {"test_accuracy", test_accuracy}, {"train_loss", train_loss}};
    if (kind == BaselineKind::lr) {
      j["inverse_regularization"] = config.inverse_l2;
    } else {
      j["hidden"] = config.hidden;
      j["batch"] = config.batch;
      j["activation"] = nn::activation_name(config.activation);
      j["optimizer"] = nn::optimizer_name(config.optimizer);
      j["learning_rate"] = config.learning_rate;
    }
    return j;
  }
};

/// Per-step action classifier. lr: one dense layer + softmax with L2 penalty ‖W‖²/(2·C·n);
/// mlp: one hidden layer, no penalty. Accuracy is measured like accuracy_match.
inline BaselineResult train_classifier_baseline(BaselineKind kind, const nn::Tensor& train_x, std::span<const int> train_y,
                                                const nn::Tensor& test_x, std::span<const int> test_y,
                                                bcq::ClassifierConfig cfg) {
  if (kind == BaselineKind::lr) {
    cfg.hidden = 0;
    if (!(cfg.inverse_l2 > 0.0)) throw ConfigError("lr baseline: inverse regularization strength must be > 0");
  } else {
    if (cfg.hidden == 0) throw ConfigError("mlp baseline: hidden layer size must be > 0");
    cfg.inverse_l2 = 0.0;
  }
  bcq::Classifier clf(kind == BaselineKind::lr ? "lr" : "mlp", train_x.cols(), 2, cfg.hidden, cfg.activation);
  BaselineResult r;
  r.kind = kind;
  r.config = cfg;
  r.train_loss = bcq::train_classifier(clf, train_x, train_y, cfg, kind == BaselineKind::lr ? "lr baseline" : "mlp baseline");
  r.test_accuracy = accuracy_match(clf.predict(test_x), test_y);
  return r;
}

}  // namespace bcqforge::ope
