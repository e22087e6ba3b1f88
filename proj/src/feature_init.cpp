#include "graphuil/feature_init.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "graphuil/error.hpp"
#include "graphuil/rng.hpp"

namespace graphuil {

FeatureMethod parse_feature_method(const std::string& name) {
  if (name == "walk_skipgram" || name == "walk") return FeatureMethod::walk_skipgram;
  if (name == "spectral") return FeatureMethod::spectral;
  if (name == "random") return FeatureMethod::random;
  if (name == "file") return FeatureMethod::file;
  throw std::invalid_argument("unknown feature method: " + name);
}

std::string to_string(FeatureMethod m) {
  switch (m) {
    case FeatureMethod::walk_skipgram: return "walk_skipgram";
    case FeatureMethod::spectral: return "spectral";
    case FeatureMethod::random: return "random";
    case FeatureMethod::file: return "file";
  }
  return "?";
}

void FeatureInitSpec::validate() const {
  if (dim < 1) throw std::invalid_argument("feature dim must be >= 1");
  if (method == FeatureMethod::walk_skipgram) {
    if (walk.walks_per_node == 0 || walk.walk_length == 0 || walk.window == 0 || walk.negatives == 0 ||
        walk.epochs == 0 || !(walk.learning_rate > 0)) {
      throw std::invalid_argument("walk parameters must be positive");
    }
  }
}

Matrix init_features(const Graph& g, const FeatureInitSpec& spec) {
  spec.validate();
  if (g.num_nodes() == 0) throw std::invalid_argument("init_features on an empty graph");
  switch (spec.method) {
    case FeatureMethod::walk_skipgram: return walk_skipgram_features(g, spec.dim, spec.walk, spec.seed);
    case FeatureMethod::spectral: return spectral_features(g, spec.dim);
    case FeatureMethod::random: return random_features(g.num_nodes(), spec.dim, spec.seed);
    case FeatureMethod::file: return load_feature_file(spec.file, g, spec.dim, spec.file_has_ids);
  }
  throw std::logic_error("unhandled feature method");
}

Matrix random_features(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x72616e64ULL});
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = sd * standard_normal(rng);
  return x;
}

Matrix spectral_features(const Graph& g, std::size_t dim, double tol, std::size_t max_iter) {
  const std::size_t n = g.num_nodes();
  if (dim == 0 || dim >= n) throw std::invalid_argument("spectral_features requires 0 < dim < node count");
  const SparseSymMatrix p = propagation_matrix(g);
  const auto block = static_cast<Eigen::Index>(std::min(n, dim + std::max<std::size_t>(8, dim / 2)));
  const auto rows = static_cast<Eigen::Index>(n);
  const auto want = static_cast<Eigen::Index>(dim);

  // Iterate on (P + I) / 2: same eigenvectors, spectrum shifted into [0, 1],
  // so the dominant directions are the algebraically largest ones of P.
  auto apply = [&](const Matrix& q) {
    Matrix out = 0.5 * q;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) {
        out.row(static_cast<Eigen::Index>(i)) += (0.5 * p.values[e]) * q.row(p.cols[e]);
      }
    }
    return out;
  };

  Matrix q = random_features(n, static_cast<std::size_t>(block), 0x5eed).leftCols(block);
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    Eigen::HouseholderQR<Matrix> qr(apply(q));
    q = qr.householderQ() * Matrix::Identity(rows, block);
    const Matrix sq = apply(q);
    const Matrix t = q.transpose() * sq;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
    // Ritz pairs, largest first.
    const Eigen::MatrixXd v = eig.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd theta = eig.eigenvalues().reverse();
    q = q * v;
    const Matrix r = sq * v - q * theta.asDiagonal();
    residual = r.leftCols(want).colwise().norm().maxCoeff();
    if (residual < tol) break;
  }
  if (!(residual < tol)) throw ConvergenceError("spectral_features did not converge", residual);

  Matrix x = q.leftCols(want);
  for (Eigen::Index c = 0; c < want; ++c) {
    Eigen::Index arg = 0;
    x.col(c).cwiseAbs().maxCoeff(&arg);
    if (x(arg, c) < 0) x.col(c) *= -1.0;
  }
  return x;
}

std::vector<std::vector<NodeId>> uniform_walks(const Graph& g, std::size_t walks_per_node, std::size_t walk_length,
                                               std::uint64_t seed) {
  std::vector<std::vector<NodeId>> walks;
  walks.reserve(walks_per_node * g.num_nodes());
  for (std::size_t round = 0; round < walks_per_node; ++round) {
    for (NodeId start = 0; start < g.num_nodes(); ++start) {
      Rng rng = make_rng(seed, {0x77616c6bULL, round, start});
      std::vector<NodeId> walk{start};
      walk.reserve(walk_length);
      while (walk.size() < walk_length) {
        auto nb = g.neighbors(walk.back());
        if (nb.empty()) break;
        walk.push_back(nb[uniform_index(rng, nb.size())]);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

namespace {

/// Cumulative table for sampling nodes proportional to degree^0.75.
class UnigramSampler {
 public:
  explicit UnigramSampler(const Graph& g) {
    cumulative_.reserve(g.num_nodes());
    double acc = 0.0;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      acc += std::pow(static_cast<double>(g.degree(v)), 0.75);
      cumulative_.push_back(acc);
    }
  }
  bool empty() const { return cumulative_.empty() || cumulative_.back() <= 0.0; }
  NodeId operator()(Rng& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<NodeId>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

double fast_sigmoid(double z) {
  if (z > 30.0) return 1.0;
  if (z < -30.0) return 0.0;
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace

Matrix walk_skipgram_features(const Graph& g, std::size_t dim, const WalkParams& walk, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const auto d = static_cast<Eigen::Index>(dim);
  Rng init_rng = make_rng(seed, {0x73796e30ULL});
  Matrix emb(n, d);
  for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = (uniform01(init_rng) - 0.5) / static_cast<double>(dim);
  Matrix ctx = Matrix::Zero(n, d);

  const auto walks = uniform_walks(g, walk.walks_per_node, walk.walk_length, seed);
  const UnigramSampler sampler(g);
  if (sampler.empty()) return emb;

  std::size_t total_positions = 0;
  for (const auto& w : walks) total_positions += w.size();
  total_positions *= walk.epochs;

  Rng rng = make_rng(seed, {0x7367ULL});
  Eigen::RowVectorXd grad_in(d);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < walk.epochs; ++epoch) {
    for (const auto& w : walks) {
      for (std::size_t i = 0; i < w.size(); ++i, ++processed) {
        const double lr = walk.learning_rate *
                          std::max(1e-4, 1.0 - static_cast<double>(processed) / static_cast<double>(total_positions));
        const NodeId center = w[i];
        const std::size_t lo = i >= walk.window ? i - walk.window : 0;
        const std::size_t hi = std::min(w.size(), i + walk.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          grad_in.setZero();
          for (std::size_t k = 0; k <= walk.negatives; ++k) {
            NodeId target;
            double label;
            if (k == 0) {
              target = w[j];
              label = 1.0;
            } else {
              target = sampler(rng);
              if (target == w[j]) continue;
              label = 0.0;
            }
            const double score = fast_sigmoid(emb.row(center).dot(ctx.row(target)));
            const double step = (label - score) * lr;
            grad_in += step * ctx.row(target);
            ctx.row(target) += step * emb.row(center);
          }
          emb.row(center) += grad_in;
        }
      }
    }
  }
  return emb;
}

Matrix load_feature_file(const std::filesystem::path& path, const Graph& g, std::size_t dim, bool has_ids) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file: " + path.string());
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!(in >> rows >> cols)) throw ParseError("feature file header must be `N dim`", 1);
  if (rows != g.num_nodes()) {
    throw std::invalid_argument("feature file has " + std::to_string(rows) + " rows, graph has " +
                                std::to_string(g.num_nodes()) + " nodes");
  }
  if (cols != dim) {
    throw std::invalid_argument("feature file dim " + std::to_string(cols) + " != expected " + std::to_string(dim));
  }
  const auto index = has_ids ? g.label_index() : std::unordered_map<std::string, NodeId>{};
  Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::vector<bool> seen(rows, false);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t row = r;
    if (has_ids) {
      std::string id;
      if (!(in >> id)) throw ParseError("feature file truncated", r + 2);
      auto it = index.find(id);
      if (it == index.end()) throw ParseError("unknown node id in feature file: " + id, r + 2);
      row = it->second;
      if (seen[row]) throw ParseError("duplicate node id in feature file: " + id, r + 2);
      seen[row] = true;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!(in >> x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)))) {
        throw ParseError("feature file truncated", r + 2);
      }
    }
  }
  return x;
}

void save_feature_file(const std::filesystem::path& path, const Matrix& x, const Graph* ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write feature file: " + path.string());
  out.precision(17);
  out << x.rows() << ' ' << x.cols() << '\n';
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (ids != nullptr) out << ids->label(static_cast<NodeId>(r)) << ' ';
    for (Eigen::Index c = 0; c < x.cols(); ++c) out << (c ? " " : "") << x(r, c);
    out << '\n';
  }
}

}  // namespace graphuil
