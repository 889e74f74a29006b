#pragma once

// The equivalence-class engine for first-order formulas: a closed FO formula
// of radius <= 1 in prenex form determines, level by level, a union of capped
// pattern-census classes that coincides with its satisfaction set. Levels run
// from m (innermost, all variables pinned by binary layers) down to 0 (no
// layers); parameters follow the recurrence (n,k) -> (2n-1, n^2+k) from the
// base (3,2).

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mso2d/formula.hpp"
#include "mso2d/grid.hpp"
#include "mso2d/verdict.hpp"

namespace mso2d {

struct LevelParams {
  int n = 0;
  int k = 0;
  friend bool operator==(const LevelParams&, const LevelParams&) = default;
};

// Per-level parameters for a prenex formula with m quantifiers, indexed by
// level 0..m. Level m is (3,2); each step outward doubles the window.
inline std::vector<LevelParams> params_schedule(int m) {
  if (m < 0) throw std::invalid_argument("quantifier count must be >= 0");
  std::vector<LevelParams> sched(static_cast<std::size_t>(m) + 1);
  sched[m] = {3, 2};
  for (int level = m - 1; level >= 0; --level) {
    int n = sched[level + 1].n;
    int k = sched[level + 1].k;
    sched[level] = {2 * n - 1, n * n + k};
  }
  return sched;
}

inline std::string schedule_string(const std::vector<LevelParams>& sched) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = sched.size(); i-- > 0;) {
    out << '(' << sched[i].n << ',' << sched[i].k << ')';
    if (i != 0) out << ", ";
  }
  out << ']';
  return out.str();
}

// --------------------------------------------------------------------------
// Consistency: every binary layer carries exactly one mark, and the marked
// patterns overlay into a single (2n-1)-sided neighbourhood block around it.

namespace detail_sig {

inline constexpr Cell kUnset = 0xffff;

// Overlays, for one layer, the unique positive patterns marked at each
// offset into the block centred on the mark. Returns nullopt when the
// sparse counts cannot come from a single mark per layer.
inline std::optional<WindowKey> glued_block_for_layer(const Signature& sig, int layer) {
  int n = sig.n;
  int side = 2 * n - 1;
  int c = n - 1;  // centre coordinate of the block

  WindowKey block;
  block.side = side;
  block.cells.assign(static_cast<std::size_t>(side) * side, kUnset);

  for (int vy = 0; vy < n; ++vy)
    for (int vx = 0; vx < n; ++vx) {
      const WindowKey* found = nullptr;
      for (auto& [w, count] : sig.counts) {
        if (!cell_layer(w.at(vx, vy), layer)) continue;
        if (found) return std::nullopt;  // two candidates for this offset
        if (count != 1) return std::nullopt;
        found = &w;
      }
      if (!found) return std::nullopt;
      // Place so that the marked cell lands on the block centre.
      int x0 = c - vx, y0 = c - vy;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          Cell& dst = block.at(x0 + x, y0 + y);
          Cell src = found->at(x, y);
          if (dst != kUnset && dst != src) return std::nullopt;  // overlay clash
          dst = src;
        }
    }

  // The overlays cover the whole block; each layer may carry at most one
  // mark in it, and this layer's mark sits exactly at the centre.
  for (int j = 1; j <= sig.layers; ++j) {
    int marks = 0;
    for (Cell cell : block.cells) marks += cell_layer(cell, j);
    if (j == layer && marks != 1) return std::nullopt;
    if (marks > 1) return std::nullopt;
  }
  if (!cell_layer(block.at(c, c), layer)) return std::nullopt;
  return block;
}

}  // namespace detail_sig

// Neighbourhood blocks of all layers, in layer order; nullopt when the
// signature is not consistent.
inline std::optional<std::vector<WindowKey>> glued_blocks(const Signature& sig) {
  std::vector<WindowKey> blocks;
  blocks.reserve(sig.layers);
  for (int j = 1; j <= sig.layers; ++j) {
    auto b = detail_sig::glued_block_for_layer(sig, j);
    if (!b) return std::nullopt;
    blocks.push_back(std::move(*b));
  }
  return blocks;
}

inline bool is_consistent(const Signature& sig) {
  if (sig.layers == 0) return true;
  return glued_blocks(sig).has_value();
}

// --------------------------------------------------------------------------
// The extension relation between a class at (n,k) with one extra layer and a
// class at (2n-1, n^2+k) without it.

namespace detail_sig {

inline void check_extension_shapes(const Signature& g, const Signature& f) {
  if (g.layers != f.layers + 1)
    throw std::invalid_argument("extension must add exactly one layer");
  if (f.n != 2 * g.n - 1 || f.k != g.n * g.n + g.k)
    throw std::invalid_argument("extension parameter shapes do not match");
  if (!(g.alphabet == f.alphabet)) throw std::invalid_argument("alphabet mismatch");
}

// Central n-window of a (2n-1)-window.
inline WindowKey central_window(const WindowKey& big, int n) {
  int p = (n - 1) / 2;
  return big.sub(p, p, n);
}

}  // namespace detail_sig

inline bool is_extension(const Signature& g, const Signature& f) {
  detail_sig::check_extension_shapes(g, f);
  int n = g.n;
  int new_layer = g.layers;

  // Condition 1: for every base pattern P, the census of big windows with
  // centre P dominates the census of extended windows projecting to P, with
  // equality whenever the unmarked extension of P is below the cap.
  std::map<WindowKey, long long> lhs;   // P -> sum of f over big windows with centre P
  std::map<WindowKey, long long> rhs;   // P -> sum of g over windows projecting to P
  std::map<WindowKey, int> unmarked;    // P -> g(P x all-zero layer)
  for (auto& [w, count] : f.counts) lhs[detail_sig::central_window(w, n)] += count;
  for (auto& [w, count] : g.counts) {
    WindowKey base = w.drop_layer(new_layer);
    rhs[base] += count;
    bool has_mark = false;
    for (Cell c : w.cells)
      if (cell_layer(c, new_layer)) {
        has_mark = true;
        break;
      }
    if (!has_mark) unmarked[base] = count;
  }
  std::map<WindowKey, bool> seen;
  for (auto& [p, v] : lhs) seen[p] = true;
  for (auto& [p, v] : rhs) seen[p] = true;
  for (auto& [p, _] : seen) {
    long long l = lhs.count(p) ? lhs.at(p) : 0;
    long long r = rhs.count(p) ? rhs.at(p) : 0;
    if (l < r) return false;
    int um = unmarked.count(p) ? unmarked.at(p) : 0;
    if (um < g.k && l != r) return false;
  }

  // Condition 2: every big window assembled from count-1 corner patterns of
  // g around a centred mark must project to a positive pattern of f.
  int side = f.n;
  int c = n - 1;
  struct CornerSlot {
    int x0, y0;    // corner position within the big window
    int mx, my;    // where the centre lands within the corner pattern
  };
  const CornerSlot slots[4] = {
      {0, 0, c, c}, {side - n, 0, 0, c}, {0, side - n, c, 0}, {side - n, side - n, 0, 0}};

  std::vector<const WindowKey*> cands[4];
  for (auto& [w, count] : g.counts) {
    if (count != 1) continue;
    for (int s = 0; s < 4; ++s)
      if (cell_layer(w.at(slots[s].mx, slots[s].my), new_layer)) cands[s].push_back(&w);
  }
  for (auto* q0 : cands[0])
    for (auto* q1 : cands[1])
      for (auto* q2 : cands[2])
        for (auto* q3 : cands[3]) {
          WindowKey big;
          big.side = side;
          big.cells.assign(static_cast<std::size_t>(side) * side, detail_sig::kUnset);
          const WindowKey* qs[4] = {q0, q1, q2, q3};
          bool ok = true;
          for (int s = 0; s < 4 && ok; ++s) {
            for (int y = 0; y < n && ok; ++y)
              for (int x = 0; x < n; ++x) {
                Cell& dst = big.at(slots[s].x0 + x, slots[s].y0 + y);
                Cell src = qs[s]->at(x, y);
                if (dst != detail_sig::kUnset && dst != src) {
                  ok = false;
                  break;
                }
                dst = src;
              }
          }
          if (!ok) continue;  // corners do not assemble into a window
          if (f.count_of(big.drop_layer(new_layer)) < 1) return false;
        }
  return true;
}

// --------------------------------------------------------------------------
// Enumeration of consistent extensions: every extension class is realizable
// by marking the centre of some positive big window of f, and the extended
// signature is a function of f and that window alone.

struct ExtensionEnumeration {
  std::vector<Signature> extensions;
  bool truncated = false;
};

namespace detail_sig {

// Signature of "f with a fresh mark at the centre of an occurrence of Q".
inline Signature extend_by_window(const Signature& f, const WindowKey& Q, int n, int k) {
  Signature g;
  g.n = n;
  g.k = k;
  g.layers = f.layers + 1;
  g.alphabet = f.alphabet;
  int layer = g.layers;
  int c = n - 1;  // centre of Q, side 2n-1

  // Sub-window census of Q: occurrences of each small pattern over the mark.
  std::map<WindowKey, int> covering;
  for (int uy = 0; uy < n; ++uy)
    for (int ux = 0; ux < n; ++ux) ++covering[Q.sub(ux, uy, n)];

  // Base patterns: subtract the occurrences now covered by the mark.
  std::map<WindowKey, std::pair<long long, bool>> sums;  // P -> (sum, saturated seen)
  for (auto& [w, count] : f.counts) {
    auto& slot = sums[central_window(w, n)];
    slot.first += count;
    slot.second = slot.second || (count == f.k);
  }
  std::map<WindowKey, int> out;
  for (auto& [p, slot] : sums) {
    int value;
    if (slot.second) {
      value = k;  // at least n^2+k occurrences minus at most n^2 stay >= k
    } else {
      long long covered = covering.count(p) ? covering.at(p) : 0;
      long long rest = slot.first - covered;
      if (rest < 0) rest = 0;  // impossible for a realizable census
      value = static_cast<int>(std::min<long long>(rest, k));
    }
    if (value > 0) out[p] = value;
  }

  // Marked patterns: the n^2 windows over the mark, each occurring once.
  for (int uy = 0; uy < n; ++uy)
    for (int ux = 0; ux < n; ++ux) {
      WindowKey w = Q.sub(ux, uy, n);
      int mx = c - ux, my = c - uy;
      w.at(mx, my) = make_cell(cell_base(w.at(mx, my)),
                               cell_bits(w.at(mx, my)) | (1u << (layer - 1)));
      out[w] = 1;
    }

  g.counts.assign(out.begin(), out.end());
  return g;
}

}  // namespace detail_sig

// All consistent extension signatures of f, each realized by placing the new
// mark at the centre of some positive window of f. The budget bounds the
// number of candidate windows examined; exceeding it sets `truncated`.
inline ExtensionEnumeration enumerate_consistent_extensions(const Signature& f,
                                                            std::size_t budget = 1u << 20) {
  if (f.n % 2 == 0) throw std::invalid_argument("extension needs an odd window side");
  int n = (f.n + 1) / 2;
  int k = f.k - n * n;
  if (k < 1) throw std::invalid_argument("cap too small for an extension step");

  ExtensionEnumeration result;
  std::vector<Signature> seen;
  std::size_t examined = 0;
  for (auto& [Q, count] : f.counts) {
    if (++examined > budget) {
      result.truncated = true;
      break;
    }
    Signature g = detail_sig::extend_by_window(f, Q, n, k);
    if (!is_consistent(g)) continue;
    if (!is_extension(g, f)) continue;
    bool dup = false;
    for (auto& s : seen)
      if (s == g) {
        dup = true;
        break;
      }
    if (!dup) seen.push_back(std::move(g));
  }
  std::sort(seen.begin(), seen.end(),
            [](const Signature& a, const Signature& b) { return a.counts < b.counts; });
  result.extensions = std::move(seen);
  return result;
}

// --------------------------------------------------------------------------
// The class union of a formula: lazy membership with memoisation.

class ClassUnion {
 public:
  explicit ClassUnion(const Formula& phi, std::size_t budget = 1u << 20)
      : alphabet_(phi.alphabet), budget_(budget) {
    if (!is_first_order(phi))
      throw std::invalid_argument("the class engine handles first-order formulas only");
    if (!is_closed(phi)) throw std::invalid_argument("the class engine needs a closed formula");
    Formula reduced = reduce_radius_to_one(phi);
    Formula prenexed = to_prenex(reduced);
    auto [prefix, kernel] = split_prenex(prenexed.root);
    prefix_ = std::move(prefix);
    kernel_ = kernel;
    if (radius(kernel_) > 1)
      throw std::logic_error("kernel radius above 1 after reduction");
    if (prefix_.empty())
      throw std::invalid_argument("the class engine needs at least one quantifier");
    if (static_cast<int>(prefix_.size()) > kMaxLayers)
      throw std::invalid_argument("too many quantifiers for the layer encoding");
    schedule_ = params_schedule(static_cast<int>(prefix_.size()));
    for (std::size_t j = 0; j < prefix_.size(); ++j) layer_of_[prefix_[j].second] = static_cast<int>(j) + 1;
  }

  const std::vector<LevelParams>& schedule() const { return schedule_; }
  int quantifiers() const { return static_cast<int>(prefix_.size()); }
  const NodePtr& kernel() const { return kernel_; }

  // Is the class of `sig` (at the given level's parameters) inside the union
  // of classes whose members satisfy the formula with the first `level`
  // variables pinned by the layers?
  EvalVerdict membership(const Signature& sig, int level) const {
    if (level < 0 || level > quantifiers()) throw std::invalid_argument("level out of range");
    if (sig.n != schedule_[level].n || sig.k != schedule_[level].k)
      throw std::invalid_argument("signature parameters do not match the level");
    if (sig.layers != level)
      throw std::invalid_argument("signature layer count does not match the level");

    MembKey key{level, sig};
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = memo_.find(key);
      if (it != memo_.end()) {
        ++hits_;
        return it->second;
      }
    }
    EvalVerdict v = compute(sig, level);
    {
      std::lock_guard<std::mutex> lock(mu_);
      memo_.emplace(std::move(key), v);
      ++misses_;
    }
    return v;
  }

  EvalVerdict membership(const Signature& sig) const { return membership(sig, 0); }

  struct CacheStats {
    std::size_t entries, hits, misses;
  };
  CacheStats cache_stats() const {
    std::lock_guard<std::mutex> lock(mu_);
    return {memo_.size(), hits_, misses_};
  }

 private:
  struct MembKey {
    int level;
    Signature sig;
    friend bool operator==(const MembKey& a, const MembKey& b) {
      return a.level == b.level && a.sig == b.sig;
    }
  };
  struct MembKeyHash {
    std::size_t operator()(const MembKey& k) const {
      return SignatureHash{}(k.sig) * 1099511628211ull + static_cast<std::size_t>(k.level);
    }
  };

  EvalVerdict compute(const Signature& sig, int level) const {
    if (level == quantifiers()) return EvalVerdict::of(kernel_satisfied(sig));
    auto extensions = enumerate_consistent_extensions(sig, budget_);
    bool exists = prefix_[level].first == NodeKind::Exists;
    bool unknown = extensions.truncated;
    std::string unknown_note =
        extensions.truncated ? "extension enumeration truncated by budget" : "";
    for (auto& g : extensions.extensions) {
      EvalVerdict v = membership(g, level + 1);
      if (v.is_unknown()) {
        unknown = true;
        unknown_note = v.note;
        continue;
      }
      if (exists && v.is_true()) return EvalVerdict::yes();
      if (!exists && v.is_false()) return EvalVerdict::no();
    }
    if (unknown) return EvalVerdict::unknown(unknown_note);
    return exists ? EvalVerdict::no() : EvalVerdict::yes();
  }

  // All variables pinned: the kernel is decided on the layer neighbourhood
  // blocks. Every member of a consistent class gives the same answer.
  bool kernel_satisfied(const Signature& sig) const {
    auto blocks = glued_blocks(sig);
    if (!blocks) throw std::invalid_argument("kernel evaluation needs a consistent signature");
    int n = sig.n;
    int centre = n - 1;

    // Relative pin positions: rel[i][j] = pin_j - pin_i when within reach.
    int m = sig.layers;
    std::vector<std::vector<std::optional<Position>>> rel(
        m + 1, std::vector<std::optional<Position>>(m + 1));
    for (int i = 1; i <= m; ++i)
      for (int j = 1; j <= m; ++j) {
        if (i == j) {
          rel[i][j] = Position{0, 0};
          continue;
        }
        const WindowKey& b = (*blocks)[i - 1];
        for (int y = 0; y < b.side; ++y)
          for (int x = 0; x < b.side; ++x)
            if (cell_layer(b.at(x, y), j)) rel[i][j] = Position{x - centre, y - centre};
      }
    for (int i = 1; i <= m; ++i)
      for (int j = i + 1; j <= m; ++j)
        if (rel[i][j] && rel[j][i] && !(*rel[i][j] == -*rel[j][i]))
          throw std::logic_error("layer blocks disagree on pin geometry");

    std::function<bool(const NodePtr&)> go = [&](const NodePtr& f) -> bool {
      switch (f->kind) {
        case NodeKind::Not: return !go(f->lhs);
        case NodeKind::And: return go(f->lhs) && go(f->rhs);
        case NodeKind::Or: return go(f->lhs) || go(f->rhs);
        case NodeKind::Eq: {
          auto [i, d1] = term_ref(f->t1);
          auto [j, d2] = term_ref(f->t2);
          if (i == j) return d1 == d2;
          if (rel[i][j]) return d1 == *rel[i][j] + d2;
          if (rel[j][i]) return d2 == *rel[j][i] + d1;
          return false;  // pins further apart than any radius-1 atom can reach
        }
        case NodeKind::Colour: {
          auto [j, d] = term_ref(f->t1);
          const WindowKey& b = (*blocks)[j - 1];
          Cell cell = b.at(static_cast<int>(centre + d.a), static_cast<int>(centre + d.b));
          return alphabet_.name(cell_base(cell)) == f->symbol;
        }
        default:
          throw std::logic_error("unexpected node in a pinned kernel");
      }
    };
    return go(kernel_);
  }

  std::pair<int, Position> term_ref(const Term& t) const {
    auto it = layer_of_.find(t.var);
    if (it == layer_of_.end())
      throw std::logic_error("kernel variable not bound by the prefix: " + t.var);
    return {it->second, t.offset()};
  }

  Alphabet alphabet_;
  std::vector<std::pair<NodeKind, std::string>> prefix_;
  NodePtr kernel_;
  std::vector<LevelParams> schedule_;
  std::map<std::string, int> layer_of_;
  std::size_t budget_;
  mutable std::mutex mu_;
  mutable std::unordered_map<MembKey, EvalVerdict, MembKeyHash> memo_;
  mutable std::size_t hits_ = 0, misses_ = 0;
};

// Satisfaction via the class union: the configuration only enters through
// its level-0 census.
inline EvalVerdict evaluate_via_classes(const Configuration& x, const Formula& phi,
                                        std::size_t budget = 1u << 20) {
  ClassUnion cu(phi, budget);
  Signature sig = signature_of(x, cu.schedule()[0].n, cu.schedule()[0].k);
  return cu.membership(sig, 0);
}

inline EvalVerdict evaluate_via_classes(const Configuration& x, const ClassUnion& cu) {
  Signature sig = signature_of(x, cu.schedule()[0].n, cu.schedule()[0].k);
  return cu.membership(sig, 0);
}

}  // namespace mso2d
