#include "slitbundle/system.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "slitbundle/error.hpp"

namespace slitbundle {

MetricField MetricField::euclidean(int dim) {
  MetricField m;
  m.dim_ = dim;
  return m;
}

MetricField MetricField::from_expressions(const std::vector<std::vector<std::string>>& entries, int dim) {
  if (static_cast<int>(entries.size()) != dim) throw ConfigError("metric must have n rows");
  std::vector<Expression> flat;
  for (const auto& row : entries) {
    if (static_cast<int>(row.size()) != dim) throw ConfigError("metric must have n columns");
    for (const auto& e : row) flat.push_back(Expression::parse(e, dim));
  }
  MetricField m;
  m.dim_ = dim;
  m.eval_ = std::make_shared<ExpressionEvaluator>(std::move(flat), dim);
  return m;
}

Mat MetricField::operator()(const Point& q) const {
  if (!eval_) return Mat::Identity(dim_, dim_);
  Mat g(dim_, dim_);
  std::vector<double> out(static_cast<std::size_t>(dim_ * dim_));
  eval_->eval(q.span(), out);
  for (int r = 0; r < dim_; ++r) {
    for (int c = 0; c < dim_; ++c) g(r, c) = out[static_cast<std::size_t>(r * dim_ + c)];
  }
  return g;
}

Mat System::frame_matrix(const Point& q) const {
  Mat e(dim, rank());
  for (int i = 0; i < rank(); ++i) e.col(i) = frame[static_cast<std::size_t>(i)](q);
  return e;
}

double System::norm(const Point& q, const Vec& v) const {
  if (metric.is_euclidean()) return v.norm();
  return std::sqrt(v.dot(metric(q) * v));
}

void System::check_at(const Point& q) const {
  const int k = rank();
  if (k < 2 || k > dim) throw ConfigError("frame rank must satisfy 2 <= k <= n");
  const Mat e = frame_matrix(q);
  Eigen::JacobiSVD<Mat> svd(e);
  const auto& s = svd.singularValues();
  if (!(s[k - 1] >= rank_tol * s[0]) || !(s[0] > 0.0)) throw RankDeficiency("frame is not linearly independent");
  const Mat g = metric(q);
  if (!g.isApprox(g.transpose(), 1e-12)) throw ConfigError("metric is not symmetric");
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) throw RankDeficiency("metric is not positive definite");
}

System make_system(std::string name, int dim, std::vector<VectorField> frame, MetricField metric, Domain domain,
                   SampleBox box) {
  System sys;
  sys.name = std::move(name);
  sys.dim = dim;
  if (dim < 2 || dim > kMaxDualDirections) {
    throw ConfigError("dimension must be between 2 and " + std::to_string(kMaxDualDirections));
  }
  for (const auto& f : frame) {
    if (f.dim() != dim) throw ConfigError("frame field dimension does not match the system dimension");
  }
  sys.frame = std::move(frame);
  if (metric.dim() != dim) throw ConfigError("metric dimension does not match the system dimension");
  sys.metric = std::move(metric);
  sys.domain = std::move(domain);
  if (box.lo.size() == 0) {
    box.lo = Vec::Constant(dim, -2.0);
    box.hi = Vec::Constant(dim, 2.0);
  }
  if (box.lo.size() != dim || box.hi.size() != dim) throw ConfigError("sample box dimension mismatch");
  sys.box = std::move(box);
  if (sys.rank() < 2 || sys.rank() > dim) throw ConfigError("frame rank must satisfy 2 <= k <= n");
  return sys;
}

}  // namespace slitbundle
