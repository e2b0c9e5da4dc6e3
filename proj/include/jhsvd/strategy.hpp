#pragma once

// Cyclic and perfectly parallel (p-) pivot strategies.
//
// All indices are 1-based, as in the usual pivot-pair notation; a pair
// (p, q) always has p < q.  A p-strategy of even order n is a sequence of
// n - 1 p-steps, each made of n / 2 mutually disjoint pairs, that visits
// every pair of the strict upper triangle exactly once.

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "jhsvd/error.hpp"

namespace jhsvd {

struct PivotPair {
  int p = 0;
  int q = 0;
  friend auto operator<=>(const PivotPair&, const PivotPair&) = default;
};

using PStep = std::vector<PivotPair>;

enum class StrategyKind {
  row_closest,
  col_closest,
  reversed_row,
  reversed_col,
  brent_luk,
  modified_modulus,
  custom,
};

/// Sequential reference ordering a p-strategy is measured against.
enum class Reference { row, col };

struct PStrategy {
  int n = 0;
  std::vector<PStep> steps;
  StrategyKind kind = StrategyKind::custom;

  /// All pairs in processing order (step by step).
  [[nodiscard]] std::vector<PivotPair> flatten() const;
  [[nodiscard]] int pairs_per_step() const noexcept { return n / 2; }

  /// Exact equality of the step sequences (the kind tag is ignored).
  friend bool operator==(const PStrategy& a, const PStrategy& b) {
    return a.n == b.n && a.steps == b.steps;
  }
};

struct SequentialOrdering {
  int n = 0;
  std::vector<PivotPair> pairs;
};

SequentialOrdering row_cyclic(int n);
SequentialOrdering column_cyclic(int n);
SequentialOrdering reference_ordering(Reference ref, int n);

/// (l(1), ..., l(tau)): the position (1-based) of each flattened strategy pair
/// within the reference ordering.
std::vector<int> index_permutation(const SequentialOrdering& reference, const PStrategy& strat);

enum class Closeness { a_closer, equal, b_closer };

/// Lexicographic comparison of the index permutations of `a` and `b`.
Closeness closer_to(const SequentialOrdering& reference, const PStrategy& a, const PStrategy& b);

struct SearchLimits {
  int max_order = 64;  // pairs are tracked in 64-bit vertex masks
  std::uint64_t max_nodes = 50'000'000;
};

/// Thrown when the closest-strategy search would exceed its budget; callers
/// should build the strategy from a smaller order with expand_pstrategy.
class SearchBudgetExceeded : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// The p-strategy closest to the row- (or column-) cyclic ordering, found by
/// depth-first search over maximal independent sets of the pair-collision
/// graph taken in lexicographic order.  Throws SearchBudgetExceeded when
/// n > limits.max_order or the node budget runs out.
PStrategy closest_pstrategy(Reference ref, int n, const SearchLimits& limits = {});

/// Doubles the order of a closest strategy: every pair (p, q) expands into
/// the 2x2 block of pairs it covers in the order-2n matrix.
PStrategy expand_pstrategy(const PStrategy& strat, Reference ref);

/// Reverses the flattened pair sequence and re-chunks it into p-steps.
PStrategy reverse_pstrategy(const PStrategy& strat);

/// Round-robin tournament ordering; the first step is (1,2),(3,4),...
PStrategy brent_luk(int n);

/// Modulus-type ordering: pairs (i, j) of 1..n-1 with i + j constant modulo
/// n - 1 share a step, the remaining index is paired with n.
PStrategy modified_modulus(int n);

struct Violation {
  enum class Type { order, step_count, step_size, range, collision, duplicate, missing };
  Type type;
  int step = -1;  ///< 1-based step index, -1 when not step-specific
  std::string message;
};

std::vector<Violation> validate_pstrategy(const PStrategy& strat);

/// True iff step i of `a` and step i of `b` hold the same set of pairs, for all i.
bool step_equivalent(const PStrategy& a, const PStrategy& b);

/// Builds any supported strategy of order n.  Closest strategies beyond
/// `limits.max_order` are obtained by repeatedly expanding a closest
/// strategy of order n / 2^k <= max_order.
PStrategy make_pstrategy(StrategyKind kind, int n, const SearchLimits& limits = {});

std::string_view to_string(StrategyKind kind);
/// Accepts the CLI spellings: row, col, rrow, rcol, bl, mm.
StrategyKind parse_strategy_kind(std::string_view name);

/// Text table: first line "n s t", then s lines of t tokens "p:q".
std::string format_pstrategy(const PStrategy& strat);
/// Parses format_pstrategy output; throws InvalidArgument on malformed text
/// or on any validate_pstrategy violation.
PStrategy parse_pstrategy(std::string_view text);

}  // namespace jhsvd
