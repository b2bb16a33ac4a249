#include "slitbundle/systems.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include "slitbundle/error.hpp"

namespace slitbundle {

namespace {

struct HeisenbergE1 {
  template <class S>
  void operator()(std::span<const S> x, std::span<S> out) const {
    out[0] = S(1.0);
    out[1] = S(0.0);
    out[2] = S(-0.5) * x[1];
  }
};
struct HeisenbergE2 {
  template <class S>
  void operator()(std::span<const S> x, std::span<S> out) const {
    out[0] = S(0.0);
    out[1] = S(1.0);
    out[2] = S(0.5) * x[0];
  }
};
struct UnicycleE1 {
  template <class S>
  void operator()(std::span<const S> x, std::span<S> out) const {
    using std::cos, std::sin;
    out[0] = cos(x[2]);
    out[1] = sin(x[2]);
    out[2] = S(0.0);
  }
};
struct MartinetE2 {
  template <class S>
  void operator()(std::span<const S> x, std::span<S> out) const {
    out[0] = S(1.0);
    out[1] = S(0.0);
    out[2] = S(0.5) * x[1] * x[1];
  }
};
struct FlatBracketE2 {
  template <class S>
  void operator()(std::span<const S> x, std::span<S> out) const {
    out[0] = S(0.0);
    out[1] = S(1.0);
    out[2] = flat_bump(x[0]);
  }
};

System heisenberg() {
  return make_system("heisenberg", 3, {VectorField::closed_form(HeisenbergE1{}, 3), VectorField::closed_form(HeisenbergE2{}, 3)},
                     MetricField::euclidean(3));
}

System unicycle() {
  SampleBox box{Vec::Constant(3, -2.0), Vec::Constant(3, 2.0)};
  box.lo[2] = -std::numbers::pi;
  box.hi[2] = std::numbers::pi;
  return make_system("unicycle", 3, {VectorField::closed_form(UnicycleE1{}, 3), VectorField::coordinate(3, 2)},
                     MetricField::euclidean(3), Domain{}, box);
}

System martinet() {
  return make_system("martinet", 3, {VectorField::coordinate(3, 1), VectorField::closed_form(MartinetE2{}, 3)},
                     MetricField::euclidean(3));
}

System involutive3() {
  return make_system("involutive3", 3, {VectorField::coordinate(3, 0), VectorField::coordinate(3, 1)},
                     MetricField::euclidean(3));
}

System flatbracket() {
  return make_system("flatbracket", 3, {VectorField::coordinate(3, 0), VectorField::closed_form(FlatBracketE2{}, 3)},
                     MetricField::euclidean(3));
}

System flat(int n) {
  std::vector<VectorField> frame;
  for (int i = 0; i < n; ++i) frame.push_back(VectorField::coordinate(n, i));
  return make_system("flat(" + std::to_string(n) + ")", n, std::move(frame), MetricField::euclidean(n));
}

// "flat(4)" or "flat4"; 0 when the name is not of that form.
int flat_dimension(const std::string& name) {
  if (name.rfind("flat", 0) != 0 || name == "flatbracket") return 0;
  std::string digits = name.substr(4);
  if (digits.size() >= 2 && digits.front() == '(' && digits.back() == ')') digits = digits.substr(1, digits.size() - 2);
  int n = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) return 0;
  return n;
}

}  // namespace

System builtin(const std::string& name) {
  if (name == "heisenberg") return heisenberg();
  if (name == "unicycle") return unicycle();
  if (name == "martinet") return martinet();
  if (name == "involutive3") return involutive3();
  if (name == "flatbracket") return flatbracket();
  if (const int n = flat_dimension(name); n > 0) return flat(n);
  throw ConfigError("unknown builtin system '" + name + "'");
}

std::vector<std::string> builtin_names() {
  return {"heisenberg", "unicycle", "martinet", "involutive3", "flatbracket", "flat(n)"};
}

bool is_builtin(const std::string& name) {
  if (name == "heisenberg" || name == "unicycle" || name == "martinet" || name == "involutive3" ||
      name == "flatbracket") {
    return true;
  }
  return flat_dimension(name) > 0;
}

}  // namespace slitbundle
