#pragma once

// Finite-support colourings of the discrete plane: positions, patterns,
// configurations over a background colour, capped occurrence counting and
// the (n,k) pattern-census signatures built on top of it.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mso2d {

using Coord = std::int64_t;

// Coordinates are limited so that shifts and window arithmetic cannot wrap.
inline constexpr Coord kCoordLimit = (Coord{1} << 40);

struct Position {
  Coord a = 0;  // east-west axis, east positive
  Coord b = 0;  // north-south axis, north positive

  friend bool operator==(const Position&, const Position&) = default;
  friend auto operator<=>(const Position&, const Position&) = default;
  Position operator+(Position o) const { return {a + o.a, b + o.b}; }
  Position operator-(Position o) const { return {a - o.a, b - o.b}; }
  Position operator-() const { return {-a, -b}; }
};

inline Coord chebyshev(Position p, Position q) {
  Coord da = p.a > q.a ? p.a - q.a : q.a - p.a;
  Coord db = p.b > q.b ? p.b - q.b : q.b - p.b;
  return da > db ? da : db;
}

struct PositionHash {
  std::size_t operator()(const Position& p) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    h ^= static_cast<std::uint64_t>(p.a) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(p.b) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

inline void check_coord(Coord c) {
  if (c > kCoordLimit || c < -kCoordLimit)
    throw std::overflow_error("coordinate out of supported range");
}

using Colour = std::uint8_t;

// Immutable shared list of colour symbols.
class Alphabet {
 public:
  Alphabet() : symbols_(std::make_shared<const std::vector<std::string>>()) {}
  explicit Alphabet(std::vector<std::string> symbols)
      : symbols_(std::make_shared<const std::vector<std::string>>(std::move(symbols))) {
    if (symbols_->empty()) throw std::invalid_argument("alphabet must be nonempty");
    if (symbols_->size() > 32) throw std::invalid_argument("alphabet too large");
    for (std::size_t i = 0; i < symbols_->size(); ++i)
      for (std::size_t j = i + 1; j < symbols_->size(); ++j)
        if ((*symbols_)[i] == (*symbols_)[j])
          throw std::invalid_argument("duplicate colour symbol: " + (*symbols_)[i]);
  }

  std::size_t size() const { return symbols_->size(); }
  const std::string& name(Colour c) const { return symbols_->at(c); }
  bool has(const std::string& s) const {
    return std::find(symbols_->begin(), symbols_->end(), s) != symbols_->end();
  }
  Colour index(const std::string& s) const {
    auto it = std::find(symbols_->begin(), symbols_->end(), s);
    if (it == symbols_->end()) throw std::invalid_argument("undeclared colour symbol: " + s);
    return static_cast<Colour>(it - symbols_->begin());
  }
  const std::vector<std::string>& symbols() const { return *symbols_; }

  friend bool operator==(const Alphabet& x, const Alphabet& y) {
    return x.symbols_ == y.symbols_ || *x.symbols_ == *y.symbols_;
  }

 private:
  std::shared_ptr<const std::vector<std::string>> symbols_;
};

// A finite pattern within a w x h bounding box; cells may be absent.
class Pattern {
 public:
  Pattern() = default;
  Pattern(Alphabet alphabet, int width, int height)
      : alphabet_(std::move(alphabet)), width_(width), height_(height),
        cells_(static_cast<std::size_t>(width) * height, kAbsent) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("pattern box must be positive");
  }

  static constexpr std::int16_t kAbsent = -1;

  const Alphabet& alphabet() const { return alphabet_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool square() const { return width_ == height_; }

  bool present(int x, int y) const { return cell(x, y) != kAbsent; }
  std::optional<Colour> at(int x, int y) const {
    auto c = cell(x, y);
    if (c == kAbsent) return std::nullopt;
    return static_cast<Colour>(c);
  }
  void set(int x, int y, Colour c) { cell(x, y) = c; }
  void clear(int x, int y) { cell(x, y) = kAbsent; }

  std::size_t support_size() const {
    std::size_t n = 0;
    for (auto c : cells_) n += (c != kAbsent);
    return n;
  }
  bool full() const { return support_size() == cells_.size(); }

  friend bool operator==(const Pattern& p, const Pattern& q) {
    return p.width_ == q.width_ && p.height_ == q.height_ && p.cells_ == q.cells_ &&
           p.alphabet_ == q.alphabet_;
  }

 private:
  std::int16_t& cell(int x, int y) {
    if (x < 0 || x >= width_ || y < 0 || y >= height_)
      throw std::out_of_range("pattern cell out of box");
    return cells_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::int16_t cell(int x, int y) const {
    if (x < 0 || x >= width_ || y < 0 || y >= height_)
      throw std::out_of_range("pattern cell out of box");
    return cells_[static_cast<std::size_t>(y) * width_ + x];
  }

  Alphabet alphabet_;
  int width_ = 0, height_ = 0;
  std::vector<std::int16_t> cells_;
};

// A colouring of the whole plane equal to `background` outside a finite set
// of overrides. Overrides never store the background colour.
class Configuration {
 public:
  Configuration() = default;
  Configuration(Alphabet alphabet, Colour background)
      : alphabet_(std::move(alphabet)), background_(background) {
    if (background_ >= alphabet_.size()) throw std::invalid_argument("background not in alphabet");
  }
  Configuration(Alphabet alphabet, const std::string& background)
      : Configuration(alphabet, alphabet.index(background)) {}

  const Alphabet& alphabet() const { return alphabet_; }
  Colour background() const { return background_; }
  const std::map<Position, Colour>& overrides() const { return overrides_; }

  Colour at(Position p) const {
    auto it = overrides_.find(p);
    return it == overrides_.end() ? background_ : it->second;
  }

  void set(Position p, Colour c) {
    check_coord(p.a);
    check_coord(p.b);
    if (c >= alphabet_.size()) throw std::invalid_argument("colour not in alphabet");
    if (c == background_)
      overrides_.erase(p);
    else
      overrides_[p] = c;
  }
  void set(Position p, const std::string& c) { set(p, alphabet_.index(c)); }

  std::vector<Position> support() const {
    std::vector<Position> s;
    s.reserve(overrides_.size());
    for (auto& [p, c] : overrides_) s.push_back(p);
    return s;
  }
  bool empty_support() const { return overrides_.empty(); }

  // Bounding box of the support; nullopt when the support is empty.
  std::optional<std::pair<Position, Position>> bbox() const {
    if (overrides_.empty()) return std::nullopt;
    Coord amin = std::numeric_limits<Coord>::max(), amax = std::numeric_limits<Coord>::min();
    Coord bmin = amin, bmax = amax;
    for (auto& [p, c] : overrides_) {
      amin = std::min(amin, p.a);
      amax = std::max(amax, p.a);
      bmin = std::min(bmin, p.b);
      bmax = std::max(bmax, p.b);
    }
    return std::make_pair(Position{amin, bmin}, Position{amax, bmax});
  }

  friend bool operator==(const Configuration& x, const Configuration& y) {
    return x.background_ == y.background_ && x.overrides_ == y.overrides_ &&
           x.alphabet_ == y.alphabet_;
  }

 private:
  Alphabet alphabet_;
  Colour background_ = 0;
  std::map<Position, Colour> overrides_;
};

// y = shift(x, v) has y_u = x_{u+v}; the support translates by -v.
inline Configuration shift(const Configuration& x, Position v) {
  Configuration y(x.alphabet(), x.background());
  for (auto& [p, c] : x.overrides()) y.set(p - v, c);
  return y;
}

// ---------------------------------------------------------------------------
// Layered cells: a base colour plus up to kMaxLayers binary layers. Layer j
// (1-based) contributes bit j-1. Used by the class engine, where a level-l
// alphabet is the base alphabet crossed with l binary layers.

using Cell = std::uint16_t;
inline constexpr int kMaxLayers = 8;

inline Cell make_cell(Colour base, unsigned bits = 0) {
  return static_cast<Cell>(base | (bits << 5));
}
inline Colour cell_base(Cell c) { return static_cast<Colour>(c & 0x1f); }
inline unsigned cell_bits(Cell c) { return c >> 5; }
inline bool cell_layer(Cell c, int layer) { return (cell_bits(c) >> (layer - 1)) & 1u; }

// Dense square pattern over layered cells; the key type of signatures.
// Cells are stored row-major with index y*side + x.
struct WindowKey {
  int side = 0;
  std::vector<Cell> cells;

  Cell at(int x, int y) const { return cells[static_cast<std::size_t>(y) * side + x]; }
  Cell& at(int x, int y) { return cells[static_cast<std::size_t>(y) * side + x]; }

  WindowKey sub(int x0, int y0, int s) const {
    WindowKey w;
    w.side = s;
    w.cells.resize(static_cast<std::size_t>(s) * s);
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) w.at(x, y) = at(x0 + x, y0 + y);
    return w;
  }

  bool uniform(Cell c) const {
    return std::all_of(cells.begin(), cells.end(), [&](Cell v) { return v == c; });
  }

  // Drop the topmost of `layers` binary layers.
  WindowKey drop_layer(int layers) const {
    WindowKey w = *this;
    Cell mask = static_cast<Cell>(~(1u << (5 + layers - 1)));
    for (auto& c : w.cells) c &= mask;
    return w;
  }

  friend bool operator==(const WindowKey&, const WindowKey&) = default;
  friend auto operator<=>(const WindowKey&, const WindowKey&) = default;
};

struct WindowKeyHash {
  std::size_t operator()(const WindowKey& w) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(w.side));
    for (Cell c : w.cells) mix(c);
    return static_cast<std::size_t>(h);
  }
};

// Read-only view of a configuration with extra binary layers carrying one
// marked position each ("pins").
class LayeredView {
 public:
  explicit LayeredView(const Configuration& base, std::span<const Position> pins = {})
      : base_(&base), pins_(pins.begin(), pins.end()) {
    if (pins_.size() > kMaxLayers) throw std::invalid_argument("too many layers");
  }

  const Configuration& base() const { return *base_; }
  int layers() const { return static_cast<int>(pins_.size()); }
  const std::vector<Position>& pins() const { return pins_; }

  Cell at(Position p) const {
    unsigned bits = 0;
    for (std::size_t j = 0; j < pins_.size(); ++j)
      if (pins_[j] == p) bits |= (1u << j);
    return make_cell(base_->at(p), bits);
  }

  Cell background_cell() const { return make_cell(base_->background(), 0); }

  std::vector<Position> support() const {
    std::vector<Position> s = base_->support();
    for (auto p : pins_)
      if (base_->at(p) == base_->background()) s.push_back(p);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  WindowKey window(Position anchor, int side) const {
    WindowKey w;
    w.side = side;
    w.cells.resize(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) w.at(x, y) = at({anchor.a + x, anchor.b + y});
    return w;
  }

 private:
  const Configuration* base_;
  std::vector<Position> pins_;
};

// Capped occurrence census of the n x n patterns of a configuration.
// Sparse: only patterns with a positive capped count are stored; the
// all-background pattern is always present with the cap value, because a
// finite-support configuration contains it at infinitely many positions.
struct Signature {
  int n = 0;
  int k = 0;
  int layers = 0;
  Alphabet alphabet;  // base alphabet
  std::vector<std::pair<WindowKey, int>> counts;  // sorted by key, values in 1..k

  int count_of(const WindowKey& w) const {
    auto it = std::lower_bound(counts.begin(), counts.end(), w,
                               [](const auto& e, const WindowKey& key) { return e.first < key; });
    if (it != counts.end() && it->first == w) return it->second;
    return 0;
  }

  WindowKey background_key() const {
    WindowKey w;
    w.side = n;
    w.cells.assign(static_cast<std::size_t>(n) * n, make_cell(0, 0));
    return w;  // caller fixes the colour; see signature_of
  }

  friend bool operator==(const Signature& x, const Signature& y) {
    return x.n == y.n && x.k == y.k && x.layers == y.layers && x.counts == y.counts &&
           x.alphabet == y.alphabet;
  }
};

struct SignatureHash {
  std::size_t operator()(const Signature& s) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(s.n));
    mix(static_cast<std::uint64_t>(s.k));
    mix(static_cast<std::uint64_t>(s.layers));
    WindowKeyHash wh;
    for (auto& [w, c] : s.counts) {
      mix(wh(w));
      mix(static_cast<std::uint64_t>(c));
    }
    return static_cast<std::size_t>(h);
  }
};

inline Signature signature_of(const LayeredView& view, int n, int k) {
  if (n < 1 || k < 1) throw std::invalid_argument("signature needs n >= 1 and k >= 1");
  Signature sig;
  sig.n = n;
  sig.k = k;
  sig.layers = view.layers();
  sig.alphabet = view.base().alphabet();

  Cell bg = view.background_cell();
  WindowKey bgkey;
  bgkey.side = n;
  bgkey.cells.assign(static_cast<std::size_t>(n) * n, bg);

  std::unordered_map<WindowKey, long long, WindowKeyHash> tally;
  auto sup = view.support();
  if (!sup.empty()) {
    Coord amin = sup.front().a, amax = sup.front().a;
    Coord bmin = sup.front().b, bmax = sup.front().b;
    for (auto p : sup) {
      amin = std::min(amin, p.a);
      amax = std::max(amax, p.a);
      bmin = std::min(bmin, p.b);
      bmax = std::max(bmax, p.b);
    }
    for (Coord a = amin - (n - 1); a <= amax; ++a)
      for (Coord b = bmin - (n - 1); b <= bmax; ++b) {
        WindowKey w = view.window({a, b}, n);
        if (w.cells == bgkey.cells) continue;  // counted by fiat below
        ++tally[w];
      }
  }

  sig.counts.reserve(tally.size() + 1);
  for (auto& [w, c] : tally)
    sig.counts.emplace_back(w, static_cast<int>(std::min<long long>(c, k)));
  sig.counts.emplace_back(bgkey, k);
  std::sort(sig.counts.begin(), sig.counts.end());
  return sig;
}

inline Signature signature_of(const Configuration& x, int n, int k) {
  return signature_of(LayeredView(x), n, k);
}

// min(#occurrences of P in x, k) for a full square pattern P.
inline int count_occurrences_capped(const Configuration& x, const Pattern& P, int k) {
  if (!P.square()) throw std::invalid_argument("capped counting needs a square pattern");
  if (!P.full()) throw std::invalid_argument("capped counting needs a full support pattern");
  if (k < 1) throw std::invalid_argument("cap must be >= 1");
  if (!(P.alphabet() == x.alphabet())) throw std::invalid_argument("alphabet mismatch");
  int n = P.width();

  bool all_bg = true;
  for (int y = 0; y < n && all_bg; ++y)
    for (int x2 = 0; x2 < n; ++x2)
      if (*P.at(x2, y) != x.background()) {
        all_bg = false;
        break;
      }
  if (all_bg) return k;  // occurs at infinitely many positions

  auto box = x.bbox();
  if (!box) return 0;  // a non-background pattern cannot occur in the blank plane
  long long count = 0;
  for (Coord a = box->first.a - (n - 1); a <= box->second.a; ++a)
    for (Coord b = box->first.b - (n - 1); b <= box->second.b; ++b) {
      bool match = true;
      for (int dy = 0; dy < n && match; ++dy)
        for (int dx = 0; dx < n; ++dx)
          if (*P.at(dx, dy) != x.at({a + dx, b + dy})) {
            match = false;
            break;
          }
      if (match && ++count >= k) return k;
    }
  return static_cast<int>(count);
}

// Exact occurrence count of a general-support pattern with anchors restricted
// to the given window. Untied to the capped census; provided for ad-hoc
// pattern queries.
inline long long count_occurrences_in_window(const Configuration& x, const Pattern& P,
                                             Position lo, Position hi) {
  if (!(P.alphabet() == x.alphabet())) throw std::invalid_argument("alphabet mismatch");
  long long count = 0;
  for (Coord a = lo.a; a <= hi.a; ++a)
    for (Coord b = lo.b; b <= hi.b; ++b) {
      bool match = true;
      for (int dy = 0; dy < P.height() && match; ++dy)
        for (int dx = 0; dx < P.width(); ++dx) {
          auto c = P.at(dx, dy);
          if (c && *c != x.at({a + dx, b + dy})) {
            match = false;
            break;
          }
        }
      if (match) ++count;
    }
  return count;
}

inline bool equivalent(const Configuration& x, const Configuration& y, int n, int k) {
  if (!(x.alphabet() == y.alphabet())) throw std::invalid_argument("alphabet mismatch");
  return signature_of(x, n, k) == signature_of(y, n, k);
}

// ---------------------------------------------------------------------------
// Text formats.
//
// Configuration:
//   alphabet: s1 s2 ...
//   background: s1
//   cell <a> <b> <symbol>
//
// Pattern: same, with a `support-only` line instead of `background`, and
// cell coordinates within [0,w) x [0,h) implied by the cells given.

namespace detail {
inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}
}  // namespace detail

inline Configuration parse_configuration(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::optional<Alphabet> alphabet;
  std::optional<std::string> background;
  std::vector<std::tuple<Coord, Coord, std::string>> cells;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    auto fail = [&](const std::string& msg) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": " + msg);
    };
    if (toks[0] == "alphabet:") {
      if (toks.size() < 2) fail("alphabet needs at least one symbol");
      alphabet = Alphabet(std::vector<std::string>(toks.begin() + 1, toks.end()));
    } else if (toks[0] == "background:") {
      if (toks.size() != 2) fail("background needs exactly one symbol");
      background = toks[1];
    } else if (toks[0] == "cell") {
      if (toks.size() != 4) fail("cell needs: cell <a> <b> <symbol>");
      cells.emplace_back(std::stoll(toks[1]), std::stoll(toks[2]), toks[3]);
    } else {
      fail("unrecognized directive: " + toks[0]);
    }
  }
  if (!alphabet) throw std::runtime_error("missing alphabet line");
  if (!background) throw std::runtime_error("missing background line");
  Configuration cfg(*alphabet, *background);
  for (auto& [a, b, s] : cells) cfg.set({a, b}, s);
  return cfg;
}

inline std::string print_configuration(const Configuration& x) {
  std::ostringstream out;
  out << "alphabet:";
  for (auto& s : x.alphabet().symbols()) out << ' ' << s;
  out << "\nbackground: " << x.alphabet().name(x.background()) << '\n';
  for (auto& [p, c] : x.overrides())
    out << "cell " << p.a << ' ' << p.b << ' ' << x.alphabet().name(c) << '\n';
  return out.str();
}

inline Pattern parse_pattern(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::optional<Alphabet> alphabet;
  bool support_only = false;
  std::vector<std::tuple<Coord, Coord, std::string>> cells;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks[0] == "alphabet:") {
      alphabet = Alphabet(std::vector<std::string>(toks.begin() + 1, toks.end()));
    } else if (toks[0] == "support-only") {
      support_only = true;
    } else if (toks[0] == "cell") {
      if (toks.size() != 4)
        throw std::runtime_error("line " + std::to_string(lineno) + ": bad cell line");
      cells.emplace_back(std::stoll(toks[1]), std::stoll(toks[2]), toks[3]);
    } else {
      throw std::runtime_error("line " + std::to_string(lineno) + ": unrecognized directive");
    }
  }
  if (!alphabet) throw std::runtime_error("missing alphabet line");
  if (!support_only) throw std::runtime_error("pattern file needs the support-only flag");
  if (cells.empty()) throw std::runtime_error("pattern needs at least one cell");
  Coord amin = std::get<0>(cells[0]), amax = amin;
  Coord bmin = std::get<1>(cells[0]), bmax = bmin;
  for (auto& [a, b, s] : cells) {
    amin = std::min(amin, a);
    amax = std::max(amax, a);
    bmin = std::min(bmin, b);
    bmax = std::max(bmax, b);
  }
  Pattern P(*alphabet, static_cast<int>(amax - amin + 1), static_cast<int>(bmax - bmin + 1));
  for (auto& [a, b, s] : cells)
    P.set(static_cast<int>(a - amin), static_cast<int>(b - bmin), alphabet->index(s));
  return P;
}

inline std::string print_pattern(const Pattern& P) {
  std::ostringstream out;
  out << "alphabet:";
  for (auto& s : P.alphabet().symbols()) out << ' ' << s;
  out << "\nsupport-only\n";
  for (int y = 0; y < P.height(); ++y)
    for (int x = 0; x < P.width(); ++x)
      if (auto c = P.at(x, y)) out << "cell " << x << ' ' << y << ' ' << P.alphabet().name(*c) << '\n';
  return out.str();
}

// Human-readable key for a layered window: rows printed north to south,
// cells as base symbol plus an optional +bits suffix.
inline std::string window_key_string(const WindowKey& w, const Alphabet& alphabet, int layers) {
  std::ostringstream out;
  for (int y = w.side - 1; y >= 0; --y) {
    if (y != w.side - 1) out << ';';
    for (int x = 0; x < w.side; ++x) {
      if (x) out << ' ';
      Cell c = w.at(x, y);
      out << alphabet.name(cell_base(c));
      if (layers > 0) {
        out << '+';
        for (int j = 1; j <= layers; ++j) out << (cell_layer(c, j) ? '1' : '0');
      }
    }
  }
  return out.str();
}

}  // namespace mso2d
