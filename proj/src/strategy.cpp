#include "jhsvd/strategy.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <numeric>
#include <set>
#include <sstream>

namespace jhsvd {

namespace {

void require_order(int n, const char* what) {
  if (n < 2) throw InvalidArgument(std::string(what) + ": order must be at least 2");
}

void require_even_order(int n, const char* what) {
  require_order(n, what);
  if (n % 2 != 0) throw InvalidArgument(std::string(what) + ": order must be even");
}

void require_valid(const PStrategy& s, const char* what) {
  const auto v = validate_pstrategy(s);
  if (!v.empty()) throw InvalidArgument(std::string(what) + ": " + v.front().message);
}

// Position of pair (p, q) in the reference ordering, 0-based.
class PairIndex {
 public:
  explicit PairIndex(const SequentialOrdering& ref)
      : n_(ref.n), pos_(static_cast<std::size_t>(ref.n) * ref.n, -1) {
    for (std::size_t k = 0; k < ref.pairs.size(); ++k) pos_[slot(ref.pairs[k])] = static_cast<int>(k);
  }
  [[nodiscard]] int operator()(PivotPair pr) const {
    if (pr.p < 1 || pr.q > n_ || pr.p >= pr.q) return -1;
    return pos_[slot(pr)];
  }

 private:
  [[nodiscard]] std::size_t slot(PivotPair pr) const {
    return static_cast<std::size_t>(pr.p - 1) * n_ + (pr.q - 1);
  }
  int n_;
  std::vector<int> pos_;
};

// Edmonds' blossom algorithm on at most 64 vertices held as bitmasks; only
// answers whether the given vertex set has a perfect matching.
class PerfectMatching {
 public:
  bool exists(const std::uint64_t* adj, int n, std::uint64_t verts) {
    adj_ = adj;
    n_ = n;
    std::fill(match_, match_ + n, -1);
    for (std::uint64_t s = verts; s; s &= s - 1) {  // greedy start
      const int v = std::countr_zero(s);
      if (match_[v] >= 0) continue;
      for (std::uint64_t a = adj[v] & verts; a; a &= a - 1) {
        const int u = std::countr_zero(a);
        if (match_[u] < 0) {
          match_[u] = v;
          match_[v] = u;
          break;
        }
      }
    }
    for (std::uint64_t s = verts; s; s &= s - 1) {
      const int v = std::countr_zero(s);
      if (match_[v] >= 0) continue;
      int x = augmenting_path(v);
      if (x < 0) return false;
      while (x >= 0) {
        const int pv = parent_[x];
        const int next = match_[pv];
        match_[x] = pv;
        match_[pv] = x;
        x = next;
      }
    }
    return true;
  }

 private:
  int lca(int a, int b) const {
    bool seen[64] = {};
    for (;;) {
      a = base_[a];
      seen[a] = true;
      if (match_[a] < 0) break;
      a = parent_[match_[a]];
    }
    for (;;) {
      b = base_[b];
      if (seen[b]) return b;
      b = parent_[match_[b]];
    }
  }

  void mark_path(int v, int b, int child) {
    while (base_[v] != b) {
      in_blossom_[base_[v]] = in_blossom_[base_[match_[v]]] = true;
      parent_[v] = child;
      child = match_[v];
      v = parent_[match_[v]];
    }
  }

  int augmenting_path(int root) {
    for (int i = 0; i < n_; ++i) {
      used_[i] = false;
      parent_[i] = -1;
      base_[i] = i;
    }
    used_[root] = true;
    int head = 0, tail = 0;
    queue_[tail++] = root;
    while (head < tail) {
      const int v = queue_[head++];
      for (std::uint64_t a = adj_[v]; a; a &= a - 1) {
        const int to = std::countr_zero(a);
        if (base_[v] == base_[to] || match_[v] == to) continue;
        if (to == root || (match_[to] >= 0 && parent_[match_[to]] >= 0)) {
          const int cb = lca(v, to);
          std::fill(in_blossom_, in_blossom_ + n_, false);
          mark_path(v, cb, to);
          mark_path(to, cb, v);
          for (int i = 0; i < n_; ++i) {
            if (in_blossom_[base_[i]]) {
              base_[i] = cb;
              if (!used_[i]) {
                used_[i] = true;
                queue_[tail++] = i;
              }
            }
          }
        } else if (parent_[to] < 0) {
          parent_[to] = v;
          if (match_[to] < 0) return to;
          used_[match_[to]] = true;
          queue_[tail++] = match_[to];
        }
      }
    }
    return -1;
  }

  const std::uint64_t* adj_ = nullptr;
  int n_ = 0;
  int match_[64], parent_[64], base_[64], queue_[64];
  bool used_[64], in_blossom_[64];
};

// Depth-first search for the lexicographically least p-strategy.  Pairs are
// identified by their reference index; a p-step is grown in ascending index
// order so that each step is the sorted representative of its class, and
// steps are enumerated in lexicographic order.  The first complete strategy
// found is therefore the minimum.
//
// A pick is kept only if the still uncovered vertices can be perfectly
// matched by unused pairs that come later in the reference ordering, i.e.
// only if the current p-step can still be completed.  That test is exact,
// so it prunes nothing the plain search would accept, and in practice it
// removes almost all backtracking.
class ClosestSearch {
 public:
  ClosestSearch(const SequentialOrdering& ref, const SearchLimits& limits)
      : n_(ref.n), t_(ref.n / 2), pairs_(ref.pairs), used_(ref.pairs.size(), 0),
        index_(64 * 64, -1), limits_(limits) {
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto& pr = pairs_[k];
      masks_.push_back((1ULL << (pr.p - 1)) | (1ULL << (pr.q - 1)));
      index_[(pr.p - 1) * 64 + (pr.q - 1)] = static_cast<int>(k);
    }
    full_ = (n_ == 64) ? ~0ULL : ((1ULL << n_) - 1);
  }

  std::vector<int> run() {
    chosen_.reserve(pairs_.size());
    if (!extend(0, -1, 0)) throw InvalidArgument("closest_pstrategy: no p-strategy exists");
    return chosen_;
  }

 private:
  bool extend(int in_step, int last, std::uint64_t covered) {
    if (chosen_.size() == pairs_.size()) return true;
    if (in_step == t_) return extend(0, -1, 0);
    const int tau = static_cast<int>(pairs_.size());
    for (int i = last + 1; i < tau; ++i) {
      if (used_[i] || (masks_[i] & covered)) continue;
      const std::uint64_t now = covered | masks_[i];
      if (++nodes_ > limits_.max_nodes) {
        throw SearchBudgetExceeded("closest_pstrategy: search budget exceeded for n = " +
                                   std::to_string(n_));
      }
      used_[i] = 1;
      if (completable(i, now)) {
        chosen_.push_back(i);
        if (extend(in_step + 1, i, now)) return true;
        chosen_.pop_back();
      }
      used_[i] = 0;
    }
    return false;
  }

  [[nodiscard]] bool completable(int after, std::uint64_t covered) {
    const std::uint64_t open = full_ & ~covered;
    if (open == 0) return true;
    std::uint64_t adj[64] = {};
    for (std::uint64_t s = open; s; s &= s - 1) {
      const int a = std::countr_zero(s);
      for (std::uint64_t r = s & (s - 1); r; r &= r - 1) {
        const int b = std::countr_zero(r);
        const int j = index_[a * 64 + b];
        if (j > after && !used_[j]) {
          adj[a] |= 1ULL << b;
          adj[b] |= 1ULL << a;
        }
      }
    }
    return matcher_.exists(adj, n_, open);
  }

  int n_;
  int t_;
  const std::vector<PivotPair>& pairs_;
  std::vector<std::uint64_t> masks_;
  std::vector<char> used_;
  std::vector<int> index_;
  std::vector<int> chosen_;
  std::uint64_t full_ = 0;
  std::uint64_t nodes_ = 0;
  SearchLimits limits_;
  PerfectMatching matcher_;
};

PStrategy chunk(int n, const std::vector<PivotPair>& flat, StrategyKind kind) {
  PStrategy s{n, {}, kind};
  const std::size_t t = static_cast<std::size_t>(n / 2);
  for (std::size_t k = 0; k < flat.size(); k += t) {
    s.steps.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(k),
                         flat.begin() + static_cast<std::ptrdiff_t>(std::min(k + t, flat.size())));
  }
  return s;
}

PivotPair ordered(int a, int b) { return a < b ? PivotPair{a, b} : PivotPair{b, a}; }

}  // namespace

std::vector<PivotPair> PStrategy::flatten() const {
  std::vector<PivotPair> flat;
  for (const auto& st : steps) flat.insert(flat.end(), st.begin(), st.end());
  return flat;
}

SequentialOrdering row_cyclic(int n) {
  require_order(n, "row_cyclic");
  SequentialOrdering o{n, {}};
  for (int i = 1; i < n; ++i)
    for (int j = i + 1; j <= n; ++j) o.pairs.push_back({i, j});
  return o;
}

SequentialOrdering column_cyclic(int n) {
  require_order(n, "column_cyclic");
  SequentialOrdering o{n, {}};
  for (int j = 2; j <= n; ++j)
    for (int i = 1; i < j; ++i) o.pairs.push_back({i, j});
  return o;
}

SequentialOrdering reference_ordering(Reference ref, int n) {
  return ref == Reference::row ? row_cyclic(n) : column_cyclic(n);
}

std::vector<int> index_permutation(const SequentialOrdering& reference, const PStrategy& strat) {
  if (reference.n != strat.n) throw InvalidArgument("index_permutation: orders differ");
  const PairIndex index(reference);
  const auto flat = strat.flatten();
  if (flat.size() != reference.pairs.size())
    throw InvalidArgument("index_permutation: strategy is not cyclic");
  std::vector<int> perm;
  std::vector<char> seen(flat.size(), 0);
  perm.reserve(flat.size());
  for (const auto& pr : flat) {
    const int k = index(pr);
    if (k < 0 || seen[k]) throw InvalidArgument("index_permutation: strategy is not cyclic");
    seen[k] = 1;
    perm.push_back(k + 1);
  }
  return perm;
}

Closeness closer_to(const SequentialOrdering& reference, const PStrategy& a, const PStrategy& b) {
  if (a.n != b.n) throw InvalidArgument("closer_to: orders differ");
  const auto pa = index_permutation(reference, a);
  const auto pb = index_permutation(reference, b);
  const auto c = pa <=> pb;
  if (c < 0) return Closeness::a_closer;
  if (c > 0) return Closeness::b_closer;
  return Closeness::equal;
}

PStrategy closest_pstrategy(Reference ref, int n, const SearchLimits& limits) {
  require_even_order(n, "closest_pstrategy");
  if (n > limits.max_order || n > 64) {
    throw SearchBudgetExceeded("closest_pstrategy: order " + std::to_string(n) +
                               " exceeds the search cap " + std::to_string(limits.max_order));
  }
  const auto order = reference_ordering(ref, n);
  ClosestSearch search(order, limits);
  const auto idx = search.run();
  std::vector<PivotPair> flat;
  flat.reserve(idx.size());
  for (int k : idx) flat.push_back(order.pairs[k]);
  return chunk(n, flat, ref == Reference::row ? StrategyKind::row_closest : StrategyKind::col_closest);
}

PStrategy expand_pstrategy(const PStrategy& strat, Reference ref) {
  require_valid(strat, "expand_pstrategy");
  const int n = strat.n;
  PStrategy out{2 * n, {}, strat.kind};
  PStep first;
  for (int k = 1; k <= n; ++k) first.push_back({2 * k - 1, 2 * k});
  out.steps.push_back(std::move(first));
  for (int i = 2; i <= 2 * n - 1; ++i) {
    PStep st;
    for (const auto& [p, q] : strat.steps[static_cast<std::size_t>(i / 2 - 1)]) {
      if (i % 2 == 0) {
        st.push_back({2 * p - 1, 2 * q - 1});
        st.push_back({2 * p, 2 * q});
      } else {
        const PivotPair ne{2 * p - 1, 2 * q};
        const PivotPair sw{2 * p, 2 * q - 1};
        if (ref == Reference::row) {
          st.push_back(ne);
          st.push_back(sw);
        } else {
          st.push_back(sw);
          st.push_back(ne);
        }
      }
    }
    out.steps.push_back(std::move(st));
  }
  return out;
}

PStrategy reverse_pstrategy(const PStrategy& strat) {
  require_valid(strat, "reverse_pstrategy");
  auto flat = strat.flatten();
  std::reverse(flat.begin(), flat.end());
  StrategyKind kind = StrategyKind::custom;
  switch (strat.kind) {
    case StrategyKind::row_closest: kind = StrategyKind::reversed_row; break;
    case StrategyKind::col_closest: kind = StrategyKind::reversed_col; break;
    case StrategyKind::reversed_row: kind = StrategyKind::row_closest; break;
    case StrategyKind::reversed_col: kind = StrategyKind::col_closest; break;
    default: break;
  }
  return chunk(strat.n, flat, kind);
}

PStrategy brent_luk(int n) {
  require_even_order(n, "brent_luk");
  const int t = n / 2;
  std::vector<int> top(t), bot(t);
  for (int k = 0; k < t; ++k) {
    top[k] = 2 * k + 1;
    bot[k] = 2 * k + 2;
  }
  // Index 1 stays put; everybody else moves one place along
  // top[1] -> ... -> top[t-1] -> bot[t-1] -> ... -> bot[0] -> top[1].
  std::vector<int*> ring;
  for (int k = 1; k < t; ++k) ring.push_back(&top[k]);
  for (int k = t - 1; k >= 0; --k) ring.push_back(&bot[k]);
  PStrategy s{n, {}, StrategyKind::brent_luk};
  for (int step = 0; step < n - 1; ++step) {
    PStep st;
    for (int k = 0; k < t; ++k) st.push_back(ordered(top[k], bot[k]));
    s.steps.push_back(std::move(st));
    if (ring.size() > 1) {
      const int carry = *ring.back();
      for (std::size_t r = ring.size() - 1; r > 0; --r) *ring[r] = *ring[r - 1];
      *ring.front() = carry;
    }
  }
  return s;
}

PStrategy modified_modulus(int n) {
  require_even_order(n, "modified_modulus");
  const int m = n - 1;
  PStrategy s{n, {}, StrategyKind::modified_modulus};
  for (int k = 0; k < m; ++k) {
    PStep st;
    for (int i = 0; i < m; ++i) {
      const int j = ((k - i) % m + m) % m;
      if (j == i) {
        st.push_back({i + 1, n});
      } else if (i < j) {
        st.push_back({i + 1, j + 1});
      }
    }
    std::sort(st.begin(), st.end());
    s.steps.push_back(std::move(st));
  }
  return s;
}

std::vector<Violation> validate_pstrategy(const PStrategy& strat) {
  using T = Violation::Type;
  std::vector<Violation> out;
  const int n = strat.n;
  if (n < 2 || n % 2 != 0) {
    out.push_back({T::order, -1, "order " + std::to_string(n) + " is not a positive even number"});
    return out;
  }
  if (static_cast<int>(strat.steps.size()) != n - 1) {
    out.push_back({T::step_count, -1,
                   "expected " + std::to_string(n - 1) + " steps, found " +
                       std::to_string(strat.steps.size())});
  }
  std::vector<int> count(static_cast<std::size_t>(n) * n, 0);
  for (std::size_t s = 0; s < strat.steps.size(); ++s) {
    const int step = static_cast<int>(s) + 1;
    const auto& st = strat.steps[s];
    if (static_cast<int>(st.size()) != n / 2) {
      out.push_back({T::step_size, step,
                     "step " + std::to_string(step) + " has " + std::to_string(st.size()) +
                         " pairs, expected " + std::to_string(n / 2)});
    }
    std::vector<char> hit(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& [p, q] : st) {
      if (p < 1 || q > n || p >= q) {
        out.push_back({T::range, step,
                       "pair " + std::to_string(p) + ":" + std::to_string(q) + " in step " +
                           std::to_string(step) + " is out of range"});
        continue;
      }
      if (hit[p] || hit[q]) {
        out.push_back({T::collision, step,
                       "pair " + std::to_string(p) + ":" + std::to_string(q) +
                           " collides with another pair in step " + std::to_string(step)});
      }
      hit[p] = hit[q] = 1;
      ++count[static_cast<std::size_t>(p - 1) * n + (q - 1)];
    }
  }
  for (int p = 1; p < n; ++p) {
    for (int q = p + 1; q <= n; ++q) {
      const int c = count[static_cast<std::size_t>(p - 1) * n + (q - 1)];
      const std::string name = std::to_string(p) + ":" + std::to_string(q);
      if (c == 0) out.push_back({T::missing, -1, "pair " + name + " is missing"});
      if (c > 1) out.push_back({T::duplicate, -1, "pair " + name + " occurs " + std::to_string(c) + " times"});
    }
  }
  return out;
}

bool step_equivalent(const PStrategy& a, const PStrategy& b) {
  if (a.n != b.n) throw InvalidArgument("step_equivalent: orders differ");
  if (a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const std::set<PivotPair> sa(a.steps[i].begin(), a.steps[i].end());
    const std::set<PivotPair> sb(b.steps[i].begin(), b.steps[i].end());
    if (sa != sb || sa.size() != a.steps[i].size() || sb.size() != b.steps[i].size()) return false;
  }
  return true;
}

PStrategy make_pstrategy(StrategyKind kind, int n, const SearchLimits& limits) {
  switch (kind) {
    case StrategyKind::brent_luk: return brent_luk(n);
    case StrategyKind::modified_modulus: return modified_modulus(n);
    case StrategyKind::custom: throw InvalidArgument("make_pstrategy: custom strategies cannot be generated");
    default: break;
  }
  require_even_order(n, "make_pstrategy");
  const bool row = kind == StrategyKind::row_closest || kind == StrategyKind::reversed_row;
  const bool reversed = kind == StrategyKind::reversed_row || kind == StrategyKind::reversed_col;
  const Reference ref = row ? Reference::row : Reference::col;
  // Direct search whenever the order allows it; expansion is only a
  // fallback, since expand(closest(n)) = closest(2n) is verified for small
  // orders but not known in general.
  int base = n;
  int doublings = 0;
  while (base > limits.max_order && base % 4 == 0) {
    base /= 2;
    ++doublings;
  }
  PStrategy s = closest_pstrategy(ref, base, limits);
  for (int k = 0; k < doublings; ++k) s = expand_pstrategy(s, ref);
  return reversed ? reverse_pstrategy(s) : s;
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::row_closest: return "row";
    case StrategyKind::col_closest: return "col";
    case StrategyKind::reversed_row: return "rrow";
    case StrategyKind::reversed_col: return "rcol";
    case StrategyKind::brent_luk: return "bl";
    case StrategyKind::modified_modulus: return "mm";
    case StrategyKind::custom: return "custom";
  }
  return "custom";
}

StrategyKind parse_strategy_kind(std::string_view name) {
  for (auto k : {StrategyKind::row_closest, StrategyKind::col_closest, StrategyKind::reversed_row,
                 StrategyKind::reversed_col, StrategyKind::brent_luk, StrategyKind::modified_modulus}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown strategy kind '" + std::string(name) + "'");
}

std::string format_pstrategy(const PStrategy& strat) {
  std::ostringstream os;
  os << strat.n << ' ' << strat.steps.size() << ' ' << strat.pairs_per_step() << '\n';
  for (const auto& st : strat.steps) {
    for (std::size_t k = 0; k < st.size(); ++k) os << (k ? " " : "") << st[k].p << ':' << st[k].q;
    os << '\n';
  }
  return os.str();
}

PStrategy parse_pstrategy(std::string_view text) {
  std::istringstream is{std::string(text)};
  int n = 0, s = 0, t = 0;
  if (!(is >> n >> s >> t)) throw InvalidArgument("strategy table: malformed header");
  if (n < 2 || s < 1 || t < 1 || t != n / 2) throw InvalidArgument("strategy table: inconsistent header");
  PStrategy out{n, {}, StrategyKind::custom};
  for (int i = 0; i < s; ++i) {
    PStep st;
    for (int k = 0; k < t; ++k) {
      std::string tok;
      if (!(is >> tok)) throw InvalidArgument("strategy table: truncated at step " + std::to_string(i + 1));
      const auto colon = tok.find(':');
      PivotPair pr{};
      if (colon == std::string::npos) throw InvalidArgument("strategy table: bad pair '" + tok + "'");
      const auto r1 = std::from_chars(tok.data(), tok.data() + colon, pr.p);
      const auto r2 = std::from_chars(tok.data() + colon + 1, tok.data() + tok.size(), pr.q);
      if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != tok.data() + colon ||
          r2.ptr != tok.data() + tok.size()) {
        throw InvalidArgument("strategy table: bad pair '" + tok + "'");
      }
      st.push_back(pr);
    }
    out.steps.push_back(std::move(st));
  }
  std::string extra;
  if (is >> extra) throw InvalidArgument("strategy table: trailing data");
  const auto v = validate_pstrategy(out);
  if (!v.empty()) throw InvalidArgument("strategy table: " + v.front().message);
  return out;
}

}  // namespace jhsvd
