#include "pssl/pid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace pssl::pid {

namespace {

const char* kMassError = "pmf mass must sum to 1 within 1e-12";

// Marginal index of a joint (s1, s2) cell for the requested source view:
// the source alphabet is S1, S2, or the S1 x S2 product.
inline int source_index(Sources s, int s1, int s2, int n2) {
  switch (s) {
    case Sources::S1: return s1;
    case Sources::S2: return s2;
    default: return s1 * n2 + s2;
  }
}

inline int source_count(Sources s, const std::array<int, 3>& sizes) {
  switch (s) {
    case Sources::S1: return sizes[0];
    case Sources::S2: return sizes[1];
    default: return sizes[0] * sizes[1];
  }
}

}  // namespace

JointPmf JointPmf::zeros(int n1, int n2, int nt) {
  JointPmf pmf;
  pmf.sizes = {n1, n2, nt};
  pmf.probs.assign(static_cast<std::size_t>(n1) * n2 * nt, 0.0);
  return pmf;
}

void JointPmf::validate() const {
  for (int s : sizes)
    check_arg(s >= 1 && s <= kMaxAlphabet, "pmf alphabet size must be in [1, 64]");
  check_arg(probs.size() == static_cast<std::size_t>(sizes[0]) * sizes[1] * sizes[2],
            "pmf table size does not match alphabet sizes");
  double mass = 0.0;
  for (double p : probs) {
    check_arg(p >= 0.0, "pmf entries must be non-negative");
    mass += p;
  }
  check_arg(std::abs(mass - 1.0) <= 1e-12, kMassError);
}

double mutual_information(const JointPmf& pmf, Sources sources) {
  pmf.validate();
  const int ns = source_count(sources, pmf.sizes);
  const int nt = pmf.sizes[2];
  std::vector<double> ps(static_cast<std::size_t>(ns), 0.0);
  std::vector<double> pt(static_cast<std::size_t>(nt), 0.0);
  std::vector<double> pst(static_cast<std::size_t>(ns) * nt, 0.0);
  for (int s1 = 0; s1 < pmf.sizes[0]; ++s1) {
    for (int s2 = 0; s2 < pmf.sizes[1]; ++s2) {
      const int s = source_index(sources, s1, s2, pmf.sizes[1]);
      for (int t = 0; t < nt; ++t) {
        const double p = pmf.at(s1, s2, t);
        ps[s] += p;
        pt[t] += p;
        pst[static_cast<std::size_t>(s) * nt + t] += p;
      }
    }
  }
  double mi = 0.0;
  for (int s = 0; s < ns; ++s) {
    for (int t = 0; t < nt; ++t) {
      const double p = pst[static_cast<std::size_t>(s) * nt + t];
      if (p <= 0.0) continue;
      mi += p * std::log2(p / (ps[s] * pt[t]));
    }
  }
  return std::max(mi, 0.0);
}

double specific_information(const JointPmf& pmf, Sources sources, int t) {
  pmf.validate();
  check_arg(t >= 0 && t < pmf.sizes[2], "target symbol out of range");
  const int ns = source_count(sources, pmf.sizes);
  const int nt = pmf.sizes[2];
  std::vector<double> ps(static_cast<std::size_t>(ns), 0.0);
  std::vector<double> pst(static_cast<std::size_t>(ns), 0.0);  // p(s, T=t)
  double pt = 0.0;
  for (int s1 = 0; s1 < pmf.sizes[0]; ++s1) {
    for (int s2 = 0; s2 < pmf.sizes[1]; ++s2) {
      const int s = source_index(sources, s1, s2, pmf.sizes[1]);
      for (int tt = 0; tt < nt; ++tt) {
        const double p = pmf.at(s1, s2, tt);
        ps[s] += p;
        if (tt == t) {
          pst[s] += p;
          pt += p;
        }
      }
    }
  }
  if (pt <= 0.0) throw std::domain_error("specific_information: p(t) = 0");
  double info = 0.0;
  for (int s = 0; s < ns; ++s) {
    if (pst[s] <= 0.0 || ps[s] <= 0.0) continue;  // zero-mass terms contribute nothing
    const double s_given_t = pst[s] / pt;
    const double t_given_s = pst[s] / ps[s];
    info += s_given_t * (std::log2(1.0 / pt) - std::log2(1.0 / t_given_s));
  }
  return info;
}

double i_min_redundancy(const JointPmf& pmf) {
  pmf.validate();
  const int nt = pmf.sizes[2];
  std::vector<double> pt(static_cast<std::size_t>(nt), 0.0);
  for (int s1 = 0; s1 < pmf.sizes[0]; ++s1)
    for (int s2 = 0; s2 < pmf.sizes[1]; ++s2)
      for (int t = 0; t < nt; ++t) pt[t] += pmf.at(s1, s2, t);
  double redundancy = 0.0;
  for (int t = 0; t < nt; ++t) {
    if (pt[t] <= 0.0) continue;
    const double i1 = specific_information(pmf, Sources::S1, t);
    const double i2 = specific_information(pmf, Sources::S2, t);
    redundancy += pt[t] * std::min(i1, i2);
  }
  return redundancy;
}

PidResult decompose(const JointPmf& pmf) {
  PidResult r;
  r.joint_mi = mutual_information(pmf, Sources::Both);
  r.redundancy = i_min_redundancy(pmf);
  r.unique1 = mutual_information(pmf, Sources::S1) - r.redundancy;
  r.unique2 = mutual_information(pmf, Sources::S2) - r.redundancy;
  r.synergy = r.joint_mi - r.redundancy - r.unique1 - r.unique2;
  return r;
}

std::vector<int> discretize(const Vector& column, int bins) {
  check_arg(bins >= 1 && bins <= kMaxAlphabet, "bins must be in [1, 64]");
  for (Eigen::Index i = 0; i < column.size(); ++i)
    check_arg(std::isfinite(column(i)), "discretize: non-finite value");
  std::vector<int> symbols(static_cast<std::size_t>(column.size()), 0);
  if (column.size() == 0 || bins == 1) return symbols;
  const double lo = column.minCoeff();
  const double hi = column.maxCoeff();
  if (hi <= lo) return symbols;  // constant column -> bin 0
  const double width = (hi - lo) / bins;
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    int b = static_cast<int>((column(i) - lo) / width);
    symbols[static_cast<std::size_t>(i)] = std::clamp(b, 0, bins - 1);
  }
  return symbols;
}

JointPmf empirical_pmf(const std::vector<int>& s1, const std::vector<int>& s2,
                       const std::vector<int>& t) {
  check_arg(!s1.empty() && s1.size() == s2.size() && s1.size() == t.size(),
            "empirical_pmf: sequences must be non-empty and equally long");
  auto max_of = [](const std::vector<int>& v) {
    int m = 0;
    for (int x : v) {
      check_arg(x >= 0, "empirical_pmf: negative symbol");
      m = std::max(m, x);
    }
    return m + 1;
  };
  JointPmf pmf = JointPmf::zeros(max_of(s1), max_of(s2), max_of(t));
  const double w = 1.0 / static_cast<double>(s1.size());
  for (std::size_t i = 0; i < s1.size(); ++i) pmf.at(s1[i], s2[i], t[i]) += w;
  pmf.validate();
  return pmf;
}

JointPmf load_pmf_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open pmf file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("pmf file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  check_arg(line == "s1,s2,t,p", "pmf csv must start with header 's1,s2,t,p'");
  struct Cell {
    int s1, s2, t;
    double p;
  };
  std::vector<Cell> cells;
  int n1 = 0, n2 = 0, nt = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    Cell c{};
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> c.s1 >> c1 >> c.s2 >> c2 >> c.t >> c3 >> c.p) || c1 != ',' || c2 != ',' ||
        c3 != ',')
      throw std::invalid_argument("pmf csv: malformed row at line " + std::to_string(lineno));
    check_arg(c.s1 >= 0 && c.s2 >= 0 && c.t >= 0, "pmf csv: negative symbol index");
    n1 = std::max(n1, c.s1 + 1);
    n2 = std::max(n2, c.s2 + 1);
    nt = std::max(nt, c.t + 1);
    cells.push_back(c);
  }
  check_arg(!cells.empty(), "pmf csv has no data rows");
  JointPmf pmf = JointPmf::zeros(n1, n2, nt);
  for (const Cell& c : cells) pmf.at(c.s1, c.s2, c.t) += c.p;
  pmf.validate();
  return pmf;
}

}  // namespace pssl::pid
