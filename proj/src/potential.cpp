#include "hamrec/potential.hpp"

#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "hamrec/csv.hpp"

namespace hamrec {

double grid_sup_norm(const FourierSeries2D& u, std::size_t n) {
  double m = 0.0;
  const double h = kTwoPi / double(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      m = std::max(m, std::abs(u.evaluate({i * h, j * h})));
  return m;
}

template <std::size_t N>
void write_series_csv(std::ostream& os, const FourierSeries<N>& s) {
  for (std::size_t i = 0; i < N; ++i) os << 'k' << (i + 1) << ',';
  os << "a,b\n";
  for (std::size_t i = 0; i < N; ++i) os << "0,";
  os << fmt_double(s.mean()) << ",0\n";
  for (const auto& t : s.terms()) {
    for (std::size_t i = 0; i < N; ++i) os << t.k[i] << ',';
    os << fmt_double(t.a) << ',' << fmt_double(t.b) << '\n';
  }
}

template <std::size_t N>
FourierSeries<N> read_series_csv(std::istream& is) {
  FourierSeries<N> s;
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::array<int, N> k{};
    double a = 0.0, b = 0.0;
    std::istringstream ls(line);
    std::string cell;
    for (std::size_t i = 0; i < N; ++i) {
      if (!std::getline(ls, cell, ',')) throw std::runtime_error("series csv: short row at line " + std::to_string(lineno));
      k[i] = std::atoi(cell.c_str());
    }
    if (!std::getline(ls, cell, ',')) throw std::runtime_error("series csv: missing a at line " + std::to_string(lineno));
    a = std::strtod(cell.c_str(), nullptr);
    if (!std::getline(ls, cell, ',')) throw std::runtime_error("series csv: missing b at line " + std::to_string(lineno));
    b = std::strtod(cell.c_str(), nullptr);
    bool zero = true;
    for (int ki : k) zero = zero && ki == 0;
    if (zero)
      s.set_mean(a);
    else
      s.set_coefficient(k, a, b);
  }
  return s;
}

template <std::size_t N>
double coefficient_rel_error(const FourierSeries<N>& fit, const FourierSeries<N>& truth) {
  const int km = std::max(fit.k_max(), truth.k_max());
  double worst = 0.0;
  for (const auto& k : canonical_wave_vectors<N>(km)) {
    const auto [af, bf] = fit.coefficient(k);
    const auto [at, bt] = truth.coefficient(k);
    worst = std::max({worst, std::abs(af - at), std::abs(bf - bt)});
  }
  const double scale = truth.max_abs_coefficient();
  return scale > 0.0 ? worst / scale : worst;
}

template void write_series_csv<2>(std::ostream&, const FourierSeries<2>&);
template void write_series_csv<3>(std::ostream&, const FourierSeries<3>&);
template FourierSeries<2> read_series_csv<2>(std::istream&);
template FourierSeries<3> read_series_csv<3>(std::istream&);
template double coefficient_rel_error<2>(const FourierSeries<2>&, const FourierSeries<2>&);
template double coefficient_rel_error<3>(const FourierSeries<3>&, const FourierSeries<3>&);

}  // namespace hamrec
