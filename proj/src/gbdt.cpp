#include "bidsel/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  const double g = gl + gr;
  const double h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                g * g / (h + lambda));
}

}  // namespace

std::string objective_name(Objective o) {
  return o == Objective::binary_logistic ? "binary_logistic" : "squared_error";
}

Objective objective_from_name(const std::string& s) {
  if (s == "binary_logistic") return Objective::binary_logistic;
  if (s == "squared_error") return Objective::squared_error;
  throw ValidationError("unknown objective '" + s + "'");
}

void Hyperparameters::validate(Objective objective) const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
  if (n_rounds < 1) throw ValidationError("n_rounds must be >= 1");
  if (!(gamma >= 0.0)) throw ValidationError("gamma must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) {
    throw ValidationError("subsample must be in (0,1]");
  }
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(min_child_weight >= 0.0)) {
    throw ValidationError("min_child_weight must be >= 0");
  }
  if (!std::isnan(base_score) && objective == Objective::binary_logistic &&
      !(base_score > 0.0 && base_score < 1.0)) {
    throw ValidationError("base_score must be a probability in (0,1) for the "
                          "logistic objective");
  }
}

nlohmann::json Hyperparameters::to_json() const {
  nlohmann::json j;
  j["learning_rate"] = learning_rate;
  j["max_depth"] = max_depth;
  j["n_rounds"] = n_rounds;
  j["gamma"] = gamma;
  j["subsample"] = subsample;
  j["lambda"] = lambda;
  j["min_child_weight"] = min_child_weight;
  if (std::isnan(base_score)) j["base_score"] = nullptr;
  else j["base_score"] = base_score;
  j["seed"] = seed;
  return j;
}

Hyperparameters Hyperparameters::from_json(const nlohmann::json& j) {
  Hyperparameters p;
  p.learning_rate = j.at("learning_rate").get<double>();
  p.max_depth = j.at("max_depth").get<int>();
  p.n_rounds = j.at("n_rounds").get<int>();
  p.gamma = j.at("gamma").get<double>();
  p.subsample = j.at("subsample").get<double>();
  p.lambda = j.value("lambda", 1.0);
  p.min_child_weight = j.value("min_child_weight", 1.0);
  if (j.contains("base_score") && !j.at("base_score").is_null()) {
    p.base_score = j.at("base_score").get<double>();
  }
  p.seed = j.value("seed", std::uint64_t{0});
  return p;
}

double TreeNode::value(std::span<const double> row) const {
  const TreeNode* node = this;
  while (!node->is_leaf()) {
    node = row[static_cast<std::size_t>(node->feature)] < node->threshold
               ? node->left.get()
               : node->right.get();
  }
  return node->leaf_weight;
}

double GbdtModel::predict_margin(std::span<const double> row) const {
  if (row.size() != n_features()) {
    throw ValidationError("prediction row has " + std::to_string(row.size()) +
                          " features, model expects " +
                          std::to_string(n_features()));
  }
  double margin = base_margin;
  for (const auto& tree : trees) {
    margin += params.learning_rate * tree->value(row);
  }
  return margin;
}

double GbdtModel::predict_row(std::span<const double> row) const {
  const double margin = predict_margin(row);
  return objective == Objective::binary_logistic ? sigmoid(margin) : margin;
}

std::vector<double> GbdtModel::predict(
    const std::vector<std::vector<double>>& X) const {
  std::vector<double> out;
  out.reserve(X.size());
  for (const auto& row : X) out.push_back(predict_row(row));
  return out;
}

namespace {

void accumulate_gain(const TreeNode& node, std::vector<double>& totals) {
  if (node.is_leaf()) return;
  totals[static_cast<std::size_t>(node.feature)] += node.gain;
  accumulate_gain(*node.left, totals);
  accumulate_gain(*node.right, totals);
}

}  // namespace

std::vector<double> GbdtModel::gain_importance() const {
  std::vector<double> totals(n_features(), 0.0);
  for (const auto& tree : trees) accumulate_gain(*tree, totals);
  return totals;
}

namespace {

nlohmann::json node_to_json(const TreeNode& node) {
  if (node.is_leaf()) {
    return {{"leaf_weight", node.leaf_weight}};
  }
  nlohmann::json j;
  j["feature"] = node.feature;
  j["threshold"] = node.threshold;
  j["gain"] = node.gain;
  j["left"] = node_to_json(*node.left);
  j["right"] = node_to_json(*node.right);
  return j;
}

std::unique_ptr<TreeNode> node_from_json(const nlohmann::json& j) {
  auto node = std::make_unique<TreeNode>();
  if (j.contains("leaf_weight")) {
    node->leaf_weight = j.at("leaf_weight").get<double>();
    return node;
  }
  node->feature = j.at("feature").get<int>();
  node->threshold = j.at("threshold").get<double>();
  node->gain = j.at("gain").get<double>();
  node->left = node_from_json(j.at("left"));
  node->right = node_from_json(j.at("right"));
  return node;
}

}  // namespace

nlohmann::json GbdtModel::to_json() const {
  nlohmann::json j;
  j["objective"] = objective_name(objective);
  j["params"] = params.to_json();
  j["feature_names"] = feature_names;
  j["base_margin"] = base_margin;
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& tree : trees) trees_json.push_back(node_to_json(*tree));
  j["trees"] = trees_json;
  return j;
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
  GbdtModel m;
  m.objective = objective_from_name(j.at("objective").get<std::string>());
  m.params = Hyperparameters::from_json(j.at("params"));
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.base_margin = j.at("base_margin").get<double>();
  for (const auto& t : j.at("trees")) m.trees.push_back(node_from_json(t));
  return m;
}

namespace {

struct FlatNode {
  double sum_g = 0.0;
  double sum_h = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
  double best_gain = -std::numeric_limits<double>::infinity();
  int left = -1;
  int right = -1;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  double leaf_weight = 0.0;
};

struct SplitScan {
  double gl = 0.0;
  double hl = 0.0;
  double prev_value = 0.0;
  bool has_prev = false;
};

std::unique_ptr<TreeNode> to_tree(const std::vector<FlatNode>& nodes, int id) {
  const FlatNode& n = nodes[static_cast<std::size_t>(id)];
  auto out = std::make_unique<TreeNode>();
  if (n.left < 0) {
    out->leaf_weight = n.leaf_weight;
    return out;
  }
  out->feature = n.feature;
  out->threshold = n.threshold;
  out->gain = n.gain;
  out->left = to_tree(nodes, n.left);
  out->right = to_tree(nodes, n.right);
  return out;
}

}  // namespace

GbdtModel fit_gbdt(const std::vector<std::vector<double>>& X,
                   const std::vector<double>& y, const Hyperparameters& params,
                   Objective objective, std::vector<std::string> feature_names) {
  params.validate(objective);
  const std::size_t n = X.size();
  if (n == 0) throw ValidationError("cannot fit on an empty training set");
  if (y.size() != n) throw ValidationError("X and y row counts differ");
  const std::size_t f = X[0].size();
  if (f == 0) throw ValidationError("training set has no features");
  for (std::size_t i = 0; i < n; ++i) {
    if (X[i].size() != f) throw ValidationError("ragged feature rows");
    for (double v : X[i]) {
      if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
    }
    if (!std::isfinite(y[i])) throw ValidationError("non-finite label");
    if (objective == Objective::binary_logistic && y[i] != 0.0 && y[i] != 1.0) {
      throw ValidationError("logistic labels must be 0 or 1");
    }
  }
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < f; ++c) feature_names.push_back("f" + std::to_string(c));
  } else if (feature_names.size() != f) {
    throw ValidationError("feature_names size does not match feature count");
  }

  GbdtModel model;
  model.objective = objective;
  model.params = params;
  model.feature_names = std::move(feature_names);
  if (objective == Objective::binary_logistic) {
    const double p0 = std::isnan(params.base_score) ? 0.5 : params.base_score;
    model.base_margin = std::log(p0 / (1.0 - p0));
  } else {
    model.base_margin = std::isnan(params.base_score) ? mean(y) : params.base_score;
  }

  // Column-major copy plus per-feature value-sorted row orders, computed once.
  std::vector<std::vector<double>> cols(f, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < f; ++c) cols[c][i] = X[i][c];
  }
  std::vector<std::vector<std::uint32_t>> sorted_idx(f);
  for (std::size_t c = 0; c < f; ++c) {
    auto& idx = sorted_idx[c];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0u);
    const auto& col = cols[c];
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (col[a] != col[b]) return col[a] < col[b];
      return a < b;
    });
  }

  std::vector<double> margins(n, model.base_margin);
  std::vector<double> grad(n), hess(n);
  std::vector<int> row_node(n);
  std::mt19937_64 rng(params.seed);
  auto n_sampled = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(params.subsample * static_cast<double>(n))));

  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      if (objective == Objective::binary_logistic) {
        const double p = sigmoid(margins[i]);
        grad[i] = p - y[i];
        hess[i] = p * (1.0 - p);
      } else {
        grad[i] = margins[i] - y[i];
        hess[i] = 1.0;
      }
    }

    std::fill(row_node.begin(), row_node.end(), -1);
    if (n_sampled == n) {
      std::fill(row_node.begin(), row_node.end(), 0);
    } else {
      std::vector<std::uint32_t> all(n);
      std::iota(all.begin(), all.end(), 0u);
      std::vector<std::uint32_t> chosen;
      chosen.reserve(n_sampled);
      std::sample(all.begin(), all.end(), std::back_inserter(chosen), n_sampled, rng);
      for (std::uint32_t i : chosen) row_node[i] = 0;
    }

    std::vector<FlatNode> nodes(1);
    for (std::size_t i = 0; i < n; ++i) {
      if (row_node[i] == 0) {
        nodes[0].sum_g += grad[i];
        nodes[0].sum_h += hess[i];
      }
    }

    std::vector<int> frontier = {0};
    for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
      std::vector<int> slot_of_node(nodes.size(), -1);
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        slot_of_node[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
      }
      std::vector<SplitScan> scan(frontier.size());

      for (std::size_t c = 0; c < f; ++c) {
        for (auto& st : scan) st = SplitScan{};
        const auto& col = cols[c];
        for (std::uint32_t idx : sorted_idx[c]) {
          const int node_id = row_node[idx];
          if (node_id < 0) continue;
          const int slot = slot_of_node[static_cast<std::size_t>(node_id)];
          if (slot < 0) continue;
          SplitScan& st = scan[static_cast<std::size_t>(slot)];
          const double v = col[idx];
          if (st.has_prev && v > st.prev_value) {
            const double threshold = 0.5 * (st.prev_value + v);
            // Guard against midpoints that collapse onto the lower value.
            if (threshold > st.prev_value) {
              FlatNode& nd = nodes[static_cast<std::size_t>(node_id)];
              const double gr = nd.sum_g - st.gl;
              const double hr = nd.sum_h - st.hl;
              if (st.hl >= params.min_child_weight &&
                  hr >= params.min_child_weight) {
                const double gain = split_gain(st.gl, st.hl, gr, hr, params.lambda);
                if (gain > nd.best_gain) {
                  nd.best_gain = gain;
                  nd.best_feature = static_cast<int>(c);
                  nd.best_threshold = threshold;
                }
              }
            }
          }
          st.gl += grad[idx];
          st.hl += hess[idx];
          st.prev_value = v;
          st.has_prev = true;
        }
      }

      std::vector<int> next_frontier;
      std::vector<int> left_of(nodes.size(), -1), right_of(nodes.size(), -1);
      for (int node_id : frontier) {
        FlatNode& nd = nodes[static_cast<std::size_t>(node_id)];
        if (nd.best_feature >= 0 && nd.best_gain >= params.gamma) {
          const int left_id = static_cast<int>(nodes.size());
          const int right_id = left_id + 1;
          nd.feature = nd.best_feature;
          nd.threshold = nd.best_threshold;
          nd.gain = nd.best_gain;
          nd.left = left_id;
          nd.right = right_id;
          left_of[static_cast<std::size_t>(node_id)] = left_id;
          right_of[static_cast<std::size_t>(node_id)] = right_id;
          nodes.emplace_back();  // invalidates nd
          nodes.emplace_back();
          next_frontier.push_back(left_id);
          next_frontier.push_back(right_id);
        } else {
          nd.leaf_weight = -nd.sum_g / (nd.sum_h + params.lambda);
        }
      }

      for (std::size_t i = 0; i < n; ++i) {
        const int node_id = row_node[i];
        if (node_id < 0) continue;
        const std::size_t nid = static_cast<std::size_t>(node_id);
        if (left_of[nid] < 0) {
          if (slot_of_node[nid] >= 0) row_node[i] = -1;  // finalized leaf
          continue;
        }
        const FlatNode& nd = nodes[nid];
        const int child = cols[static_cast<std::size_t>(nd.feature)][i] < nd.threshold
                              ? left_of[nid]
                              : right_of[nid];
        row_node[i] = child;
        nodes[static_cast<std::size_t>(child)].sum_g += grad[i];
        nodes[static_cast<std::size_t>(child)].sum_h += hess[i];
      }
      frontier = std::move(next_frontier);
    }
    // Frontier nodes that reached max depth become leaves.
    for (int node_id : frontier) {
      FlatNode& nd = nodes[static_cast<std::size_t>(node_id)];
      nd.leaf_weight = -nd.sum_g / (nd.sum_h + params.lambda);
    }

    auto tree = to_tree(nodes, 0);
    for (std::size_t i = 0; i < n; ++i) {
      margins[i] += params.learning_rate * tree->value(X[i]);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace bidsel
