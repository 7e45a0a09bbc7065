#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include <json.hpp>

namespace platoon {

// in -> hidden -> hidden -> out with tanh on the hidden layers and a linear
// output. Samples are columns.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in, int hidden, int out, std::mt19937_64& rng, double out_scale = 1.0);

  struct Cache {
    Eigen::MatrixXd x, h1, h2;
  };
  struct Grad {
    std::vector<Eigen::MatrixXd> tensors;  // same layout as params()
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;
  // Gradient of sum(dout .* output) with respect to every parameter.
  Grad backward(const Cache& cache, const Eigen::MatrixXd& dout) const;

  std::vector<Eigen::MatrixXd*> params();
  std::vector<const Eigen::MatrixXd*> params() const;
  Grad zero_grad() const;

  int input_size() const { return static_cast<int>(w1_.cols()); }
  int output_size() const { return static_cast<int>(w3_.rows()); }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  // Biases stored as single-column matrices so every parameter is a matrix.
  Eigen::MatrixXd w1_, b1_, w2_, b2_, w3_, b3_;
};

double grad_norm(const Mlp::Grad& g);
void scale_grad(Mlp::Grad& g, double factor);

class Adam {
 public:
  Adam() = default;
  explicit Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Mlp& net, const Mlp::Grad& g);
  double lr() const { return lr_; }

 private:
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace platoon
