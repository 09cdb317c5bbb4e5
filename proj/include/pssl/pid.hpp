#pragma once

#include <array>
#include <string>
#include <vector>

#include "pssl/matrix.hpp"

// Exact partial information decomposition for discrete two-source/one-target
// systems, using the Williams-Beer minimum-specific-information redundancy.
// All quantities are in bits; the 0*log(0) = 0 convention applies throughout.
namespace pssl::pid {

inline constexpr int kMaxAlphabet = 64;

enum class Sources { S1, S2, Both };

struct JointPmf {
  std::array<int, 3> sizes{};    // |S1|, |S2|, |T|
  std::vector<double> probs;     // dense, index (s1 * |S2| + s2) * |T| + t

  double& at(int s1, int s2, int t) {
    return probs[static_cast<std::size_t>((s1 * sizes[1] + s2) * sizes[2] + t)];
  }
  double at(int s1, int s2, int t) const {
    return probs[static_cast<std::size_t>((s1 * sizes[1] + s2) * sizes[2] + t)];
  }

  static JointPmf zeros(int n1, int n2, int nt);

  // Throws std::invalid_argument unless all entries are >= 0, the total mass
  // is within 1e-12 of one, and every alphabet size is in [1, 64].
  void validate() const;
};

struct PidResult {
  double joint_mi = 0.0;
  double redundancy = 0.0;
  double unique1 = 0.0;
  double unique2 = 0.0;
  double synergy = 0.0;
};

// I(S;T) in bits by direct summation over the joint table.
double mutual_information(const JointPmf& pmf, Sources sources);

// Specific information of `sources` about the outcome T = t:
//   I(T=t; S) = sum_s p(s|t) [log2(1/p(t)) - log2(1/p(t|s))].
// Throws std::domain_error when p(t) = 0.
double specific_information(const JointPmf& pmf, Sources sources, int t);

// Williams-Beer redundancy: E_t[ min_i I(T=t; S_i) ] over single sources.
double i_min_redundancy(const JointPmf& pmf);

PidResult decompose(const JointPmf& pmf);

// Equal-width binning of one column between its min and max; half-open bins
// with the final bin closed. A constant column maps to bin 0.
std::vector<int> discretize(const Vector& column, int bins);

// Builds the empirical joint pmf of two discrete sequences and a target
// sequence (counts normalized by the sequence length).
JointPmf empirical_pmf(const std::vector<int>& s1, const std::vector<int>& s2,
                       const std::vector<int>& t);

// CSV with header "s1,s2,t,p"; unlisted cells default to probability zero,
// duplicate cells accumulate. Validates on load.
JointPmf load_pmf_csv(const std::string& path);

}  // namespace pssl::pid
