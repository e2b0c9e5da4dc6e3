#pragma once

// In-process simulation of the multi-accelerator outer level.  g workers
// each own two of the 2g block-columns of G (and V).  In every outer step a
// worker shortens its pair, runs the single-node blocked Jacobi on the
// short factor, postmultiplies, and then hands one block-column to another
// worker so that the next step of the outer strategy is realized.

#include <cstdint>
#include <vector>

#include "jhsvd/driver.hpp"
#include "jhsvd/strategy.hpp"

namespace jhsvd {

enum class LinkClass { fast, slow };

/// Two-speed network: i and j share a fast link iff j == i xor 1.
struct Topology {
  int g = 1;
  [[nodiscard]] LinkClass link(int i, int j) const noexcept {
    return (i ^ 1) == j ? LinkClass::fast : LinkClass::slow;
  }
};

/// One block-column leaving a worker between two outer steps.
struct Transfer {
  int worker = 0;
  int keep = 0;  // block-column id (1-based) that stays
  int send = 0;  // block-column id that leaves
  int dest = 0;
  LinkClass link = LinkClass::slow;
  bool swap = false;  // the worker's p < q order flips after the exchange
};

/// pairs[s][i] is the block pair worker i processes in step s;
/// transitions[s] realizes step s + 1 (mod the step count) from step s.  A
/// transition is fast when all of its transfers use fast links.
struct ColumnMapping {
  int g = 1;
  std::vector<std::vector<PivotPair>> pairs;
  std::vector<std::vector<Transfer>> transitions;
  int fast_exchanges = 0;  // fast transitions per sweep, the wrap-around included
  int fast_transfers = 0;
};

/// Maximizes fast transitions per sweep, then fast transfers, over all
/// pair-to-worker assignments in which every worker keeps exactly one
/// block-column between steps.  Ties go to the lexicographically smallest
/// assignment sequence.  The search is exact up to g = 4; beyond that the
/// first step is fixed to the strategy's pair order.
ColumnMapping optimize_mapping(const PStrategy& strategy, const Topology& topology);

struct DistConfig {
  SolverConfig solver;  // solver.workers is ignored; solve_for_v selects the local triangular solve
  int g = 4;
  /// The first worker to finish its local Jacobi run asks the others to
  /// stop after their current inner sweep.  Makes results timing dependent.
  bool hybrid_early_stop = false;
};

struct ExchangeRecord {
  int sweep = 0;  // 1-based
  int step = 0;   // 1-based outer step just completed
  int worker = 0;
  int column = 0;
  int dest = 0;
  LinkClass link = LinkClass::slow;
};

struct DistResult {
  HsvdResult result;
  ColumnMapping mapping;
  std::vector<ExchangeRecord> trace;
};

/// n must split into 2g block-columns whose pairs (width n / g) are
/// multiples of 2 * solver.block_width.  g = 1 has no outer level and runs
/// the single-node driver.
DistResult run_distributed(const Eigen::Ref<const ColumnMatrix>& G, Signature J, const DistConfig& cfg);

std::string_view to_string(LinkClass c);

}  // namespace jhsvd
