#include "platoon/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace platoon {

namespace {

Eigen::MatrixXd init_weight(int rows, int cols, double scale, std::mt19937_64& rng) {
  // Uniform Glorot initialisation.
  const double limit = scale * std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Eigen::MatrixXd w(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) w(r, c) = u(rng);
  }
  return w;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data(m.data(), m.data() + m.size());
  j["data"] = data;
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw std::runtime_error("matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

Mlp::Mlp(int in, int hidden, int out, std::mt19937_64& rng, double out_scale) {
  if (in <= 0 || hidden <= 0 || out <= 0) throw std::invalid_argument("Mlp: sizes must be positive");
  w1_ = init_weight(hidden, in, 1.0, rng);
  b1_ = Eigen::MatrixXd::Zero(hidden, 1);
  w2_ = init_weight(hidden, hidden, 1.0, rng);
  b2_ = Eigen::MatrixXd::Zero(hidden, 1);
  w3_ = init_weight(out, hidden, out_scale, rng);
  b3_ = Eigen::MatrixXd::Zero(out, 1);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != w1_.cols()) throw std::invalid_argument("Mlp::forward: input size mismatch");
  Eigen::MatrixXd h1 = ((w1_ * x).colwise() + b1_.col(0)).array().tanh().matrix();
  Eigen::MatrixXd h2 = ((w2_ * h1).colwise() + b2_.col(0)).array().tanh().matrix();
  Eigen::MatrixXd out = (w3_ * h2).colwise() + b3_.col(0);
  if (cache) {
    cache->x = x;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return out;
}

Mlp::Grad Mlp::backward(const Cache& c, const Eigen::MatrixXd& dout) const {
  Grad g;
  g.tensors.resize(6);
  g.tensors[4] = dout * c.h2.transpose();
  g.tensors[5] = dout.rowwise().sum();
  Eigen::MatrixXd dh2 = (w3_.transpose() * dout).array() * (1.0 - c.h2.array().square());
  g.tensors[2] = dh2 * c.h1.transpose();
  g.tensors[3] = dh2.rowwise().sum();
  Eigen::MatrixXd dh1 = (w2_.transpose() * dh2).array() * (1.0 - c.h1.array().square());
  g.tensors[0] = dh1 * c.x.transpose();
  g.tensors[1] = dh1.rowwise().sum();
  return g;
}

std::vector<Eigen::MatrixXd*> Mlp::params() { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }
std::vector<const Eigen::MatrixXd*> Mlp::params() const { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }

Mlp::Grad Mlp::zero_grad() const {
  Grad g;
  for (const auto* p : params()) g.tensors.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  return g;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto* p : params()) j.push_back(matrix_json(*p));
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 6) throw std::runtime_error("Mlp::from_json: expected 6 tensors");
  Mlp m;
  auto ps = m.params();
  for (size_t i = 0; i < 6; ++i) *ps[i] = matrix_from_json(j[i]);
  if (m.b1_.rows() != m.w1_.rows() || m.w2_.cols() != m.w1_.rows() || m.w3_.cols() != m.w2_.rows() ||
      m.b3_.rows() != m.w3_.rows()) {
    throw std::runtime_error("Mlp::from_json: inconsistent shapes");
  }
  return m;
}

double grad_norm(const Mlp::Grad& g) {
  double s = 0.0;
  for (const auto& t : g.tensors) s += t.squaredNorm();
  return std::sqrt(s);
}

void scale_grad(Mlp::Grad& g, double factor) {
  for (auto& t : g.tensors) t *= factor;
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto* p : net.params()) {
    m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(Mlp& net, const Mlp::Grad& g) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto ps = net.params();
  for (size_t i = 0; i < ps.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g.tensors[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.tensors[i].array().square().matrix();
    *ps[i] -= (lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_)).matrix();
  }
}

}  // namespace platoon
