#include "jhsvd/distsim.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

#include "jhsvd/error.hpp"

namespace jhsvd {

namespace {

using Assignment = std::vector<int>;  // worker -> pair index within a step
constexpr std::int64_t transition_weight = std::int64_t{1} << 32;
constexpr std::int64_t infeasible = std::numeric_limits<std::int64_t>::min() / 4;

int pair_holding(const PStep& step, int column) {
  for (std::size_t k = 0; k < step.size(); ++k)
    if (step[k].p == column || step[k].q == column) return static_cast<int>(k);
  throw std::logic_error("column missing from a p-step");
}

struct Search {
  const PStrategy& strat;
  Topology topo;
  int g;
  int steps;
  // holder[s][c] = index of the pair of step s containing block-column c
  std::vector<std::vector<int>> holder;

  Search(const PStrategy& s, Topology t) : strat(s), topo(t), g(s.n / 2), steps(static_cast<int>(s.steps.size())) {
    holder.assign(static_cast<std::size_t>(steps), std::vector<int>(static_cast<std::size_t>(s.n + 1)));
    for (int k = 0; k < steps; ++k)
      for (int c = 1; c <= s.n; ++c) holder[k][c] = pair_holding(s.steps[k], c);
  }

  const PivotPair& pair(int step, int idx) const { return strat.steps[step][static_cast<std::size_t>(idx)]; }

  // Assignments of step t reachable from a (at step s) with every worker
  // keeping one block-column, in lexicographic order.
  std::vector<Assignment> successors(int s, const Assignment& a, int t) const {
    std::vector<Assignment> out;
    Assignment b(static_cast<std::size_t>(g));
    std::vector<char> used(static_cast<std::size_t>(g), 0);
    auto rec = [&](auto&& self, int i) -> void {
      if (i == g) {
        out.push_back(b);
        return;
      }
      const PivotPair& old = pair(s, a[i]);
      int cand[2] = {holder[t][old.p], holder[t][old.q]};
      if (cand[0] > cand[1]) std::swap(cand[0], cand[1]);
      for (int c : cand) {
        if (used[c]) continue;
        used[c] = 1;
        b[i] = c;
        self(self, i + 1);
        used[c] = 0;
      }
    };
    rec(rec, 0);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<Transfer> transfers(int s, const Assignment& a, int t, const Assignment& b) const {
    std::vector<int> owner(static_cast<std::size_t>(strat.n + 1));
    for (int j = 0; j < g; ++j) {
      owner[pair(t, b[j]).p] = j;
      owner[pair(t, b[j]).q] = j;
    }
    std::vector<Transfer> out;
    for (int i = 0; i < g; ++i) {
      const PivotPair& o = pair(s, a[i]);
      const PivotPair& nw = pair(t, b[i]);
      Transfer x;
      x.worker = i;
      x.keep = (o.p == nw.p || o.p == nw.q) ? o.p : o.q;
      x.send = x.keep == o.p ? o.q : o.p;
      const int recv = nw.p == x.keep ? nw.q : nw.p;
      x.dest = owner[x.send];
      x.link = topo.link(i, x.dest);
      x.swap = (x.send == o.p && recv > o.q) || (x.send == o.q && recv < o.p);
      out.push_back(x);
    }
    return out;
  }

  std::int64_t score(int s, const Assignment& a, int t, const Assignment& b) const {
    const auto tr = transfers(s, a, t, b);
    const auto fast = std::count_if(tr.begin(), tr.end(), [](const Transfer& x) { return x.link == LinkClass::fast; });
    return (fast == g ? transition_weight : 0) + fast;
  }

  std::int64_t closing_score(const Assignment& last, const Assignment& start) const {
    for (const Assignment& b : successors(steps - 1, last, 0))
      if (b == start) return score(steps - 1, last, 0, start);
    return infeasible;
  }

  // Best periodic continuation from a fixed first assignment; fills path.
  std::int64_t best_from(const Assignment& start, std::vector<Assignment>* path) const {
    std::vector<std::map<Assignment, std::int64_t>> layer(static_cast<std::size_t>(steps));
    layer[0][start] = 0;
    for (int s = 0; s + 1 < steps; ++s)
      for (const auto& [a, v] : layer[s])
        for (Assignment& b : successors(s, a, s + 1)) layer[s + 1].emplace(std::move(b), 0);
    for (auto& [a, v] : layer[steps - 1]) v = closing_score(a, start);
    for (int s = steps - 2; s >= 0; --s)
      for (auto& [a, v] : layer[s]) {
        v = infeasible;
        for (const Assignment& b : successors(s, a, s + 1)) v = std::max(v, score(s, a, s + 1, b) + layer[s + 1].at(b));
      }
    const std::int64_t total = layer[0].at(start);
    if (path && total > infeasible / 2) {
      path->assign(1, start);
      for (int s = 0; s + 1 < steps; ++s) {
        const Assignment& a = path->back();
        const std::int64_t want = layer[s].at(a);
        for (const Assignment& b : successors(s, a, s + 1))
          if (score(s, a, s + 1, b) + layer[s + 1].at(b) == want) {
            path->push_back(b);
            break;
          }
      }
    }
    return total;
  }
};

struct Slot {
  int id = 0;
  ColumnMatrix G, V;
};

}  // namespace

std::string_view to_string(LinkClass c) { return c == LinkClass::fast ? "fast" : "slow"; }

ColumnMapping optimize_mapping(const PStrategy& strategy, const Topology& topology) {
  if (!validate_pstrategy(strategy).empty()) throw InvalidArgument("optimize_mapping: invalid strategy");
  const int g = strategy.n / 2;
  if (topology.g != g) throw InvalidArgument("optimize_mapping: topology size does not match the strategy");
  if (g > 8) throw InvalidArgument("optimize_mapping: at most 8 workers are supported");
  ColumnMapping m;
  m.g = g;
  if (g == 1) {
    m.pairs = {{strategy.steps[0][0]}};
    m.transitions = {{}};
    return m;
  }
  const Search search(strategy, topology);
  Assignment start(static_cast<std::size_t>(g));
  for (int i = 0; i < g; ++i) start[i] = i;
  std::int64_t best = infeasible;
  std::vector<Assignment> path;
  do {
    std::vector<Assignment> p;
    const std::int64_t v = search.best_from(start, &p);
    if (v > best) {
      best = v;
      path = std::move(p);
    }
  } while (g <= 4 && std::next_permutation(start.begin(), start.end()));
  if (best <= infeasible / 2) throw InvalidArgument("optimize_mapping: the strategy admits no periodic mapping that moves one block-column per worker and step");

  const int steps = search.steps;
  for (int s = 0; s < steps; ++s) {
    std::vector<PivotPair> row;
    for (int i = 0; i < g; ++i) row.push_back(search.pair(s, path[s][i]));
    m.pairs.push_back(std::move(row));
    const int t = (s + 1) % steps;
    m.transitions.push_back(search.transfers(s, path[s], t, path[t]));
  }
  m.fast_exchanges = static_cast<int>(best / transition_weight);
  m.fast_transfers = static_cast<int>(best % transition_weight);
  return m;
}

DistResult run_distributed(const Eigen::Ref<const ColumnMatrix>& G, Signature J, const DistConfig& cfg) {
  const int g = cfg.g;
  const Index m = G.rows(), n = G.cols();
  const SolverConfig& sc = cfg.solver;
  if (g < 1) throw InvalidArgument("run_distributed: need at least one worker");
  if (m < n) throw InvalidArgument("run_distributed: need rows >= cols");
  if (n % (2 * g) != 0) throw InvalidArgument("run_distributed: order is not a multiple of 2g");
  const Index h = n / (2 * g), wide = 2 * h;
  if (sc.block_width < 1 || wide % (2 * sc.block_width) != 0)
    throw InvalidArgument("run_distributed: per-worker width " + std::to_string(wide) +
                          " is not a multiple of twice the block width");
  if (J.n_plus < 0 || J.n_plus > n) throw InvalidArgument("run_distributed: n_plus out of range");
  if (!G.allFinite()) throw InvalidArgument("run_distributed: non-finite input");
  if (sc.max_block_sweeps < 1) throw InvalidArgument("run_distributed: max_block_sweeps must be >= 1");

  DistResult out;
  if (g == 1) {
    SolverConfig one = sc;
    one.workers = 1;
    out.result = block_jacobi(G, J, one);
    out.mapping = optimize_mapping(make_pstrategy(sc.outer_strategy, 2), {1});
    return out;
  }
  check_column_scaling(G);
  out.mapping = optimize_mapping(make_pstrategy(sc.outer_strategy, 2 * g), {g});
  const ColumnMapping& map = out.mapping;
  const int steps = static_cast<int>(map.pairs.size());
  const bool with_v = sc.accumulate_v;
  const int mid_sweeps = sc.variant == Variant::full_block ? 30 : 1;

  // Worker state: two slots in logical order (slot 0 holds the lower id).
  std::vector<std::array<Slot, 2>> held(static_cast<std::size_t>(g));
  auto load = [&](Slot& s, int id) {
    s.id = id;
    s.G = G.middleCols((id - 1) * h, h);
    if (with_v) {
      s.V = ColumnMatrix::Zero(n, h);
      s.V.middleRows((id - 1) * h, h).setIdentity();
    }
  };
  for (int i = 0; i < g; ++i) {
    load(held[i][0], map.pairs[0][i].p);
    load(held[i][1], map.pairs[0][i].q);
  }

  std::vector<std::optional<Slot>> inbox(static_cast<std::size_t>(g));
  std::vector<SweepStats> local(static_cast<std::size_t>(g));
  std::vector<std::vector<ExchangeRecord>> traces(static_cast<std::size_t>(g));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(g));
  std::vector<SweepStats> totals;
  std::atomic<bool> failed{false}, step_done{false};
  bool converged = false;
  std::barrier sync(g);

  auto fail = [&](int i, const char* what) {
    errors[i] = std::make_exception_ptr(std::logic_error(what));
    failed.store(true);
  };

  auto update = [&](int i) {
    Slot& P = held[i][0];
    Slot& Q = held[i][1];
    ColumnMatrix A(m, wide);
    A.leftCols(h) = P.G;
    A.rightCols(h) = Q.G;
    std::vector<Index> colmap(static_cast<std::size_t>(wide));
    for (Index k = 0; k < h; ++k) {
      colmap[static_cast<std::size_t>(k)] = (P.id - 1) * h + k;
      colmap[static_cast<std::size_t>(h + k)] = (Q.id - 1) * h + k;
    }
    ColumnMatrix R = shorten(A, sc.shortening, colmap);
    WorkerPool inline_pool(1);
    const std::atomic<bool>* stop = cfg.hybrid_early_stop ? &step_done : nullptr;
    ColumnMatrix Vh;
    SweepOutcome o;
    if (sc.solve_for_v) {
      ColumnMatrix Y = R;
      o = run_block_sweeps(Y, nullptr, colmap, J, sc, mid_sweeps, inline_pool, stop);
      Vh = solve_for_V(R, Y);
    } else {
      Vh = ColumnMatrix::Identity(wide, wide);
      o = run_block_sweeps(R, &Vh, colmap, J, sc, mid_sweeps, inline_pool, stop);
    }
    if (cfg.hybrid_early_stop) step_done.store(true, std::memory_order_release);
    SweepStats s;
    for (const SweepStats& x : o.stats) {
      s.rotations += x.rotations;
      s.proper_rotations += x.proper_rotations;
    }
    local[i].rotations += s.rotations;
    local[i].proper_rotations += s.proper_rotations;
    if (s.rotations == 0) return;
    const ColumnMatrix Gn = postmultiply(A, Vh);
    P.G = Gn.leftCols(h);
    Q.G = Gn.rightCols(h);
    if (with_v) {
      ColumnMatrix B(n, wide);
      B.leftCols(h) = P.V;
      B.rightCols(h) = Q.V;
      const ColumnMatrix Vn = postmultiply(B, Vh);
      P.V = Vn.leftCols(h);
      Q.V = Vn.rightCols(h);
    }
  };

  auto body = [&](int i) {
    for (int sweep = 1; sweep <= sc.max_block_sweeps; ++sweep) {
      local[i] = {};
      for (int s = 0; s < steps; ++s) {
        if (!failed.load()) try {
            update(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed.store(true);
          }
        // a failure is seen by everyone after the next barrier
        sync.arrive_and_wait();  // local updates done
        if (failed.load()) return;
        if (s == steps - 1) {
          SweepStats t;
          for (const SweepStats& x : local) {
            t.rotations += x.rotations;
            t.proper_rotations += x.proper_rotations;
          }
          if (i == 0) {
            totals.push_back(t);
            converged = t.proper_rotations == 0;
          }
          if (t.proper_rotations == 0 || sweep == sc.max_block_sweeps) return;
        }
        if (i == 0) step_done.store(false);
        const Transfer& tr = map.transitions[s][i];
        const int leaving = held[i][0].id == tr.send ? 0 : 1;
        if (held[i][leaving].id == tr.send && held[i][1 - leaving].id == tr.keep && !inbox[tr.dest]) {
          inbox[tr.dest].emplace(std::move(held[i][leaving]));
          traces[i].push_back({sweep, s + 1, i, tr.send, tr.dest, tr.link});
        } else {
          fail(i, "exchange plan does not match the held block-columns");
        }
        sync.arrive_and_wait();  // exchange done
        if (failed.load()) return;
        held[i][leaving] = std::move(*inbox[i]);
        inbox[i].reset();
        if (held[i][0].id > held[i][1].id) std::swap(held[i][0], held[i][1]);
        const PivotPair want = map.pairs[(s + 1) % steps][i];
        if (held[i][0].id != want.p || held[i][1].id != want.q)
          fail(i, "worker holds the wrong block pair after an exchange");
      }
    }
  };

  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < g; ++i) threads.emplace_back(body, i);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ColumnMatrix W(m, n);
  std::optional<ColumnMatrix> V;
  if (with_v) V = ColumnMatrix(n, n);
  for (const auto& pair : held)
    for (const Slot& s : pair) {
      W.middleCols((s.id - 1) * h, h) = s.G;
      if (with_v) V->middleCols((s.id - 1) * h, h) = s.V;
    }

  HsvdResult& r = out.result;
  r.J = J;
  r.stats = totals;
  r.block_sweeps = static_cast<int>(totals.size());
  r.converged = converged;
  r.sigma = extract_sigma(W);
  r.U = W * r.sigma.cwiseInverse().asDiagonal();
  r.V = std::move(V);
  sort_by_signature(r);

  for (auto& t : traces) out.trace.insert(out.trace.end(), t.begin(), t.end());
  std::sort(out.trace.begin(), out.trace.end(), [](const ExchangeRecord& a, const ExchangeRecord& b) {
    return std::tie(a.sweep, a.step, a.worker) < std::tie(b.sweep, b.step, b.worker);
  });
  return out;
}

}  // namespace jhsvd
