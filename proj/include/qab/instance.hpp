#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qab {

enum class Disorder { gaussian, bimodal };

std::string to_string(Disorder d);
Disorder disorder_from_string(const std::string& s);

/// One realization of the two-pattern Hopfield disorder. Site i carries the
/// 2-vector xi_i * (cos theta_i, sin theta_i).
struct DisorderInstance {
  Disorder dist = Disorder::gaussian;
  std::uint64_t seed = 0;
  Eigen::ArrayXd xi;     // magnitudes, >= 0
  Eigen::ArrayXd theta;  // angles in [0, 2pi)

  Eigen::Index n_spins() const { return xi.size(); }
  /// 2 x N matrix of pattern vectors.
  Eigen::Matrix2Xd vectors() const;
};

/// Spins in {-1, +1}.
using SpinAssignment = Eigen::VectorXi;

DisorderInstance generate(Eigen::Index n_spins, Disorder dist, std::uint64_t seed);

/// Instance built from explicit (xi, theta) pairs; theta is wrapped to [0, 2pi).
DisorderInstance make_instance(const Eigen::ArrayXd& xi, const Eigen::ArrayXd& theta,
                               Disorder dist = Disorder::gaussian, std::uint64_t seed = 0);

/// E(s) = -|sum_i xi_i s_i|^2 / (2N).
double classical_energy(const DisorderInstance& inst, const SpinAssignment& s);

struct Candidate {
  double angle;   // separating-line angle in [0, pi)
  double energy;
};

struct ClassicalSolution {
  SpinAssignment best;
  double e0 = 0.0;
  std::vector<Candidate> candidates;  // exactly N entries, in angle order
};

/// Sort-by-angle solver: scans the N separating lines, O(N log N).
ClassicalSolution solve_classical(const DisorderInstance& inst);

struct BruteForceSolution {
  SpinAssignment best;
  double e0 = 0.0;
};

inline constexpr Eigen::Index kBruteForceMaxSpins = 24;

/// Exhaustive enumeration over 2^(N-1) assignments (s_1 = +1 fixed).
BruteForceSolution brute_force_classical(const DisorderInstance& inst);

/// Gap between the lowest and second-lowest distinct candidate energies.
double classical_gap(const DisorderInstance& inst);
double classical_gap(const ClassicalSolution& sol);

// Flat text record: header "N dist seed", then N lines "xi theta".
void write_instance(std::ostream& os, const DisorderInstance& inst);
DisorderInstance read_instance(std::istream& is);
void save_instance(const std::string& path, const DisorderInstance& inst);
DisorderInstance load_instance(const std::string& path);

}  // namespace qab
