#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace sde_sindy {

/// Variables a monomial is built from: the raw state components, or their
/// sines.
enum class BasisFamily { monomial, trig };

inline std::string_view to_string(BasisFamily f) {
  return f == BasisFamily::monomial ? "monomial" : "trig";
}

inline std::optional<BasisFamily> parse_basis_family(std::string_view s) {
  if (s == "monomial") return BasisFamily::monomial;
  if (s == "trig") return BasisFamily::trig;
  return std::nullopt;
}

/// Exponent of each basis variable; length = state dimension.
using Exponents = std::vector<int>;

inline int total_degree(const Exponents& e) {
  int s = 0;
  for (int v : e) s += v;
  return s;
}

inline std::string variable_name(int var, int dim) {
  return dim == 1 ? std::string("x") : "x" + std::to_string(var + 1);
}

/// Label such as "1", "x^3", "x1*x2^2" or "sin(x1)^2".
inline std::string term_label(const Exponents& e, BasisFamily family) {
  const int dim = static_cast<int>(e.size());
  std::string out;
  for (int v = 0; v < dim; ++v) {
    if (e[v] == 0) continue;
    if (!out.empty()) out += '*';
    std::string base = variable_name(v, dim);
    if (family == BasisFamily::trig) base = "sin(" + base + ")";
    out += base;
    if (e[v] > 1) out += '^' + std::to_string(e[v]);
  }
  return out.empty() ? "1" : out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

inline int parse_variable(std::string_view v, int dim, std::string_view label) {
  if (v == "x" && dim == 1) return 0;
  if (v.size() >= 2 && v[0] == 'x') {
    int idx = 0;
    for (char c : v.substr(1)) {
      if (!std::isdigit(static_cast<unsigned char>(c))) idx = -1;
      if (idx < 0) break;
      idx = idx * 10 + (c - '0');
    }
    if (idx >= 1 && idx <= dim) return idx - 1;
  }
  throw InvalidArgument("bad variable '" + std::string(v) + "' in term '" +
                        std::string(label) + "'");
}

}  // namespace detail

/// Inverse of term_label. Accepts "x1" and, for dim 1, "x"; repeated factors
/// multiply ("x*x" == "x^2").
inline Exponents parse_term_label(std::string_view label, int dim,
                                  BasisFamily family) {
  Exponents e(dim, 0);
  const std::string_view s = detail::trim(label);
  if (s == "1") return e;
  if (s.empty()) throw InvalidArgument("empty term label");
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t star = s.find('*', pos);
    std::string_view factor =
        detail::trim(s.substr(pos, star == std::string_view::npos ? s.npos
                                                                  : star - pos));
    int power = 1;
    if (const auto caret = factor.rfind('^');
        caret != std::string_view::npos && factor.find(')', caret) == factor.npos) {
      const std::string p(detail::trim(factor.substr(caret + 1)));
      if (p.empty() || p.find_first_not_of("0123456789") != std::string::npos)
        throw InvalidArgument("bad exponent in term '" + std::string(label) + "'");
      power = std::stoi(p);
      factor = detail::trim(factor.substr(0, caret));
    }
    if (family == BasisFamily::trig) {
      if (factor.size() < 6 || factor.substr(0, 4) != "sin(" || factor.back() != ')')
        throw InvalidArgument("trig term factor must be sin(x..): '" +
                              std::string(label) + "'");
      factor = factor.substr(4, factor.size() - 5);
    }
    e[detail::parse_variable(detail::trim(factor), dim, label)] += power;
    if (star == std::string_view::npos) break;
    pos = star + 1;
  }
  return e;
}

/// Sparse polynomial in the basis variables of one family, keyed by exponent
/// vectors. Used to describe models exactly so their true coefficients can be
/// read off in any compatible dictionary.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(int dim, BasisFamily family) : dim_(dim), family_(family) {}

  static Polynomial constant(int dim, BasisFamily family, double c) {
    Polynomial p(dim, family);
    p.add_term(Exponents(dim, 0), c);
    return p;
  }

  /// Builds from {label: coefficient} pairs.
  static Polynomial from_labels(int dim, BasisFamily family,
                                const std::map<std::string, double>& table) {
    Polynomial p(dim, family);
    for (const auto& [label, c] : table)
      p.add_term(parse_term_label(label, dim, family), c);
    return p;
  }

  int dim() const noexcept { return dim_; }
  BasisFamily family() const noexcept { return family_; }
  const std::map<Exponents, double>& terms() const noexcept { return terms_; }

  void add_term(const Exponents& e, double c) {
    if (static_cast<int>(e.size()) != dim_)
      throw InvalidArgument("exponent vector has wrong dimension");
    if (c == 0.0) return;
    const double v = (terms_[e] += c);
    if (v == 0.0) terms_.erase(e);
  }

  /// True when only the constant term (or nothing) is present; such
  /// polynomials belong to every family.
  bool is_constant() const {
    return terms_.empty() ||
           (terms_.size() == 1 && total_degree(terms_.begin()->first) == 0);
  }

  int degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
    return d;
  }

  double operator()(const double* x) const {
    double sum = 0.0;
    for (const auto& [e, c] : terms_) {
      double t = c;
      for (int v = 0; v < dim_; ++v) {
        const double b = family_ == BasisFamily::trig ? std::sin(x[v]) : x[v];
        for (int k = 0; k < e[v]; ++k) t *= b;
      }
      sum += t;
    }
    return sum;
  }

  Polynomial& operator+=(const Polynomial& o) {
    adopt_family(o);
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial out = a;
    out.adopt_family(b);
    out.terms_.clear();
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) {
        Exponents e(ea);
        for (std::size_t v = 0; v < e.size(); ++v) e[v] += eb[v];
        out.add_term(e, ca * cb);
      }
    return out;
  }

  friend Polynomial operator*(double s, Polynomial p) {
    for (auto it = p.terms_.begin(); it != p.terms_.end();) {
      it->second *= s;
      it = it->second == 0.0 ? p.terms_.erase(it) : std::next(it);
    }
    return p;
  }

 private:
  // Constants carry no family; mixing two non-constant families is an error.
  void adopt_family(const Polynomial& o) {
    if (o.dim_ != dim_) throw InvalidArgument("polynomial dimension mismatch");
    if (o.family_ == family_ || o.is_constant()) return;
    if (is_constant()) {
      family_ = o.family_;
      return;
    }
    throw InvalidArgument("cannot combine monomial and trig polynomials");
  }

  int dim_ = 1;
  BasisFamily family_ = BasisFamily::monomial;
  std::map<Exponents, double> terms_;
};

}  // namespace sde_sindy
