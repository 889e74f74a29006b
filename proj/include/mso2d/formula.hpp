#pragma once

// MSO formulas over plane colourings: terms built from the four neighbour
// functions, colour predicates, equality and set membership, with first- and
// second-order quantifiers. Includes the text grammar, a canonical printer,
// and the syntactic transformations used by the class engine.

#include <algorithm>
#include <cctype>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mso2d/grid.hpp"

namespace mso2d {

enum class Dir : std::uint8_t { North, South, East, West };

inline Position dir_offset(Dir d) {
  switch (d) {
    case Dir::North: return {0, 1};
    case Dir::South: return {0, -1};
    case Dir::East: return {1, 0};
    case Dir::West: return {-1, 0};
  }
  return {0, 0};
}

inline char dir_letter(Dir d) {
  switch (d) {
    case Dir::North: return 'N';
    case Dir::South: return 'S';
    case Dir::East: return 'E';
    case Dir::West: return 'W';
  }
  return '?';
}

// A term is a first-order variable under zero or more direction applications,
// stored outermost first: E(N(v)) has path [East, North].
struct Term {
  std::string var;
  std::vector<Dir> path;

  int depth() const { return static_cast<int>(path.size()); }
  Position offset() const {
    Position o{0, 0};
    for (Dir d : path) o = o + dir_offset(d);
    return o;
  }
  friend bool operator==(const Term&, const Term&) = default;
};

inline Term apply_dir(Dir d, Term t) {
  t.path.insert(t.path.begin(), d);
  return t;
}

enum class NodeKind : std::uint8_t {
  Eq,           // t1 = t2
  Colour,       // symbol(t1)
  Member,       // t1 in var
  ConfigColour, // symbol(var(t1)): colour of cell t1 in the quantified configuration var
  Not,
  And,
  Or,
  Exists,
  Forall,
  Exists2,
  Forall2,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind;
  Term t1, t2;                      // atoms
  std::string symbol;               // colour symbol for Colour / ConfigColour
  std::string var;                  // quantified variable / membership set variable
  std::optional<Alphabet> config_alphabet;  // set when a second-order quantifier ranges
                                            // over configurations of this alphabet
  NodePtr lhs, rhs;                 // children (lhs only for Not and quantifiers)
};

inline NodePtr mk_eq(Term a, Term b) {
  return std::make_shared<Node>(Node{NodeKind::Eq, std::move(a), std::move(b), {}, {}, {}, nullptr, nullptr});
}
inline NodePtr mk_colour(std::string symbol, Term t) {
  return std::make_shared<Node>(Node{NodeKind::Colour, std::move(t), {}, std::move(symbol), {}, {}, nullptr, nullptr});
}
inline NodePtr mk_member(Term t, std::string set_var) {
  return std::make_shared<Node>(Node{NodeKind::Member, std::move(t), {}, {}, std::move(set_var), {}, nullptr, nullptr});
}
inline NodePtr mk_config_colour(std::string symbol, std::string config_var, Term t) {
  return std::make_shared<Node>(Node{NodeKind::ConfigColour, std::move(t), {}, std::move(symbol),
                                     std::move(config_var), {}, nullptr, nullptr});
}
inline NodePtr mk_not(NodePtr a) {
  return std::make_shared<Node>(Node{NodeKind::Not, {}, {}, {}, {}, {}, std::move(a), nullptr});
}
inline NodePtr mk_and(NodePtr a, NodePtr b) {
  return std::make_shared<Node>(Node{NodeKind::And, {}, {}, {}, {}, {}, std::move(a), std::move(b)});
}
inline NodePtr mk_or(NodePtr a, NodePtr b) {
  return std::make_shared<Node>(Node{NodeKind::Or, {}, {}, {}, {}, {}, std::move(a), std::move(b)});
}
inline NodePtr mk_implies(NodePtr a, NodePtr b) { return mk_or(mk_not(std::move(a)), std::move(b)); }
inline NodePtr mk_iff(NodePtr a, NodePtr b) {
  return mk_and(mk_or(mk_not(a), b), mk_or(mk_not(b), a));
}
inline NodePtr mk_quant(NodeKind kind, std::string var, NodePtr body,
                        std::optional<Alphabet> config_alphabet = std::nullopt) {
  return std::make_shared<Node>(Node{kind, {}, {}, {}, std::move(var), std::move(config_alphabet),
                                     std::move(body), nullptr});
}
inline NodePtr mk_exists(std::string var, NodePtr body) {
  return mk_quant(NodeKind::Exists, std::move(var), std::move(body));
}
inline NodePtr mk_forall(std::string var, NodePtr body) {
  return mk_quant(NodeKind::Forall, std::move(var), std::move(body));
}
inline NodePtr mk_exists2(std::string var, NodePtr body) {
  return mk_quant(NodeKind::Exists2, std::move(var), std::move(body));
}
inline NodePtr mk_forall2(std::string var, NodePtr body) {
  return mk_quant(NodeKind::Forall2, std::move(var), std::move(body));
}

inline bool is_quantifier(NodeKind k) {
  return k == NodeKind::Exists || k == NodeKind::Forall || k == NodeKind::Exists2 ||
         k == NodeKind::Forall2;
}
inline bool is_first_order_quantifier(NodeKind k) {
  return k == NodeKind::Exists || k == NodeKind::Forall;
}
inline bool is_second_order_quantifier(NodeKind k) {
  return k == NodeKind::Exists2 || k == NodeKind::Forall2;
}

struct HierarchyLevel {
  enum class Tag { FO, SigmaBar, PiBar } tag = Tag::FO;
  int n = 0;  // >= 1 for the second-order tags

  friend bool operator==(const HierarchyLevel&, const HierarchyLevel&) = default;

  std::string str() const {
    switch (tag) {
      case Tag::FO: return "FO";
      case Tag::SigmaBar: return "SigmaBar(" + std::to_string(n) + ")";
      case Tag::PiBar: return "PiBar(" + std::to_string(n) + ")";
    }
    return "?";
  }
};

// A formula together with the colour alphabet its predicates refer to.
struct Formula {
  Alphabet alphabet;
  NodePtr root;
};

// --------------------------------------------------------------------------
// Structural queries.

inline int radius(const NodePtr& f) {
  if (!f) return 0;
  switch (f->kind) {
    case NodeKind::Eq: return std::max(f->t1.depth(), f->t2.depth());
    case NodeKind::Colour:
    case NodeKind::Member:
    case NodeKind::ConfigColour: return f->t1.depth();
    case NodeKind::Not: return radius(f->lhs);
    case NodeKind::And:
    case NodeKind::Or: return std::max(radius(f->lhs), radius(f->rhs));
    default: return radius(f->lhs);
  }
}
inline int radius(const Formula& f) { return radius(f.root); }

inline int quantifier_count(const NodePtr& f) {
  if (!f) return 0;
  int self = is_quantifier(f->kind) ? 1 : 0;
  return self + quantifier_count(f->lhs) + quantifier_count(f->rhs);
}

inline bool is_first_order(const NodePtr& f) {
  if (!f) return true;
  if (is_second_order_quantifier(f->kind)) return false;
  if (f->kind == NodeKind::ConfigColour) return false;
  return is_first_order(f->lhs) && is_first_order(f->rhs);
}
inline bool is_first_order(const Formula& f) { return is_first_order(f.root); }

namespace detail {
inline void collect_free(const NodePtr& f, std::set<std::string>& bound1,
                         std::set<std::string>& bound2, std::set<std::string>& free1,
                         std::set<std::string>& free2) {
  if (!f) return;
  switch (f->kind) {
    case NodeKind::Eq:
      if (!bound1.count(f->t1.var)) free1.insert(f->t1.var);
      if (!bound1.count(f->t2.var)) free1.insert(f->t2.var);
      return;
    case NodeKind::Colour:
      if (!bound1.count(f->t1.var)) free1.insert(f->t1.var);
      return;
    case NodeKind::Member:
      if (!bound1.count(f->t1.var)) free1.insert(f->t1.var);
      if (!bound2.count(f->var)) free2.insert(f->var);
      return;
    case NodeKind::ConfigColour:
      if (!bound1.count(f->t1.var)) free1.insert(f->t1.var);
      if (!bound2.count(f->var)) free2.insert(f->var);
      return;
    case NodeKind::Not:
      collect_free(f->lhs, bound1, bound2, free1, free2);
      return;
    case NodeKind::And:
    case NodeKind::Or:
      collect_free(f->lhs, bound1, bound2, free1, free2);
      collect_free(f->rhs, bound1, bound2, free1, free2);
      return;
    case NodeKind::Exists:
    case NodeKind::Forall: {
      bool added = bound1.insert(f->var).second;
      collect_free(f->lhs, bound1, bound2, free1, free2);
      if (added) bound1.erase(f->var);
      return;
    }
    case NodeKind::Exists2:
    case NodeKind::Forall2: {
      bool added = bound2.insert(f->var).second;
      collect_free(f->lhs, bound1, bound2, free1, free2);
      if (added) bound2.erase(f->var);
      return;
    }
  }
}
}  // namespace detail

struct FreeVars {
  std::set<std::string> first_order;
  std::set<std::string> second_order;
  bool empty() const { return first_order.empty() && second_order.empty(); }
};

inline FreeVars free_variables(const NodePtr& f) {
  FreeVars fv;
  std::set<std::string> b1, b2;
  detail::collect_free(f, b1, b2, fv.first_order, fv.second_order);
  return fv;
}
inline FreeVars free_variables(const Formula& f) { return free_variables(f.root); }

inline bool is_closed(const NodePtr& f) { return free_variables(f).empty(); }
inline bool is_closed(const Formula& f) { return is_closed(f.root); }

inline void collect_variable_names(const NodePtr& f, std::set<std::string>& out) {
  if (!f) return;
  switch (f->kind) {
    case NodeKind::Eq:
      out.insert(f->t1.var);
      out.insert(f->t2.var);
      return;
    case NodeKind::Colour:
      out.insert(f->t1.var);
      return;
    case NodeKind::Member:
    case NodeKind::ConfigColour:
      out.insert(f->t1.var);
      out.insert(f->var);
      return;
    default:
      if (is_quantifier(f->kind)) out.insert(f->var);
      collect_variable_names(f->lhs, out);
      collect_variable_names(f->rhs, out);
      return;
  }
}

// Deterministic fresh-name source: base, base1, base2, ... skipping taken names.
class FreshNames {
 public:
  explicit FreshNames(std::set<std::string> taken) : taken_(std::move(taken)) {}

  std::string fresh(const std::string& base) {
    if (!taken_.count(base)) {
      taken_.insert(base);
      return base;
    }
    for (int i = 1;; ++i) {
      std::string c = base + std::to_string(i);
      if (!taken_.count(c)) {
        taken_.insert(c);
        return c;
      }
    }
  }

 private:
  std::set<std::string> taken_;
};

// --------------------------------------------------------------------------
// Printer. Canonical form: binary connectives fully parenthesized, quantifier
// bodies run to the end of the enclosing parenthesis. parse(print(f)) == f.

namespace detail {
inline void print_term(std::ostringstream& out, const Term& t) {
  for (Dir d : t.path) out << dir_letter(d) << '(';
  out << t.var;
  for (std::size_t i = 0; i < t.path.size(); ++i) out << ')';
}

inline void print_node(std::ostringstream& out, const NodePtr& f) {
  switch (f->kind) {
    case NodeKind::Eq:
      print_term(out, f->t1);
      out << " = ";
      print_term(out, f->t2);
      return;
    case NodeKind::Colour:
      out << f->symbol << '(';
      print_term(out, f->t1);
      out << ')';
      return;
    case NodeKind::Member:
      print_term(out, f->t1);
      out << " in " << f->var;
      return;
    case NodeKind::ConfigColour:
      out << f->symbol << '(' << f->var << '(';
      print_term(out, f->t1);
      out << "))";
      return;
    case NodeKind::Not:
      out << '~';
      if (f->lhs->kind == NodeKind::And || f->lhs->kind == NodeKind::Or ||
          is_quantifier(f->lhs->kind)) {
        out << '(';
        print_node(out, f->lhs);
        out << ')';
      } else {
        print_node(out, f->lhs);
      }
      return;
    case NodeKind::And:
    case NodeKind::Or: {
      const char* op = f->kind == NodeKind::And ? " & " : " | ";
      auto child = [&](const NodePtr& c) {
        if (c->kind == NodeKind::And || c->kind == NodeKind::Or || is_quantifier(c->kind)) {
          out << '(';
          print_node(out, c);
          out << ')';
        } else {
          print_node(out, c);
        }
      };
      child(f->lhs);
      out << op;
      child(f->rhs);
      return;
    }
    case NodeKind::Exists: out << "E "; break;
    case NodeKind::Forall: out << "A "; break;
    case NodeKind::Exists2: out << "E1 "; break;
    case NodeKind::Forall2: out << "A1 "; break;
  }
  out << f->var << ". ";
  print_node(out, f->lhs);
}
}  // namespace detail

inline std::string print_formula(const NodePtr& f) {
  std::ostringstream out;
  detail::print_node(out, f);
  return out.str();
}
inline std::string print_formula(const Formula& f) { return print_formula(f.root); }

// --------------------------------------------------------------------------
// Parser.
//
//   formula := 'E' var '.' formula | 'A' var '.' formula
//            | 'E1' VAR '.' formula | 'A1' VAR '.' formula
//            | formula '|' formula | formula '&' formula | '~' formula
//            | '(' formula ')' | formula '->' formula | formula '<->' formula
//            | atom
//   atom    := term '=' term | colour '(' term ')' | term 'in' VAR
//   term    := var | 'N(' term ')' | 'S(' term ')' | 'E(' term ')' | 'W(' term ')'
//
// Precedence ~ > & > | > -> > <->. Implication and equivalence are desugared
// at parse time. Lowercase identifiers are first-order variables, uppercase
// identifiers are second-order variables; N, S, E, W are reserved. A colour
// symbol is any declared alphabet token.

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(column) + ": " + msg),
        line(line),
        column(column) {}
  int line, column;
};

namespace detail {

struct Token {
  enum Kind { Ident, Symbol, LParen, RParen, Dot, Amp, Pipe, Tilde, Arrow, DArrow, EqSign, End };
  Kind kind;
  std::string text;
  int line, column;
};

class Lexer {
 public:
  Lexer(const std::string& text, const Alphabet& alphabet) : text_(&text), alphabet_(&alphabet) {}

  Token next() {
    skip_ws();
    int line = line_, col = col_;
    if (pos_ >= text_->size()) return {Token::End, "", line, col};
    char c = (*text_)[pos_];
    auto one = [&](Token::Kind k) {
      advance();
      return Token{k, std::string(1, c), line, col};
    };
    switch (c) {
      case '(': return one(Token::LParen);
      case ')': return one(Token::RParen);
      case '.': return one(Token::Dot);
      case '&': return one(Token::Amp);
      case '|': return one(Token::Pipe);
      case '~': return one(Token::Tilde);
      case '=': return one(Token::EqSign);
      case '-':
        if (pos_ + 1 < text_->size() && (*text_)[pos_ + 1] == '>') {
          advance();
          advance();
          return {Token::Arrow, "->", line, col};
        }
        break;
      case '<':
        if (pos_ + 2 < text_->size() && (*text_)[pos_ + 1] == '-' && (*text_)[pos_ + 2] == '>') {
          advance();
          advance();
          advance();
          return {Token::DArrow, "<->", line, col};
        }
        break;
      default: break;
    }
    // Identifier or colour symbol: a maximal run of non-delimiter bytes.
    std::string word;
    while (pos_ < text_->size()) {
      char d = (*text_)[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || std::strchr("().&|~=", d)) break;
      if (d == '-' && pos_ + 1 < text_->size() && (*text_)[pos_ + 1] == '>') break;
      if (d == '<' && pos_ + 2 < text_->size() && (*text_)[pos_ + 1] == '-' &&
          (*text_)[pos_ + 2] == '>')
        break;
      word.push_back(d);
      advance();
    }
    if (word.empty()) throw ParseError("unexpected character", line, col);
    bool identish = std::isalpha(static_cast<unsigned char>(word[0])) || word[0] == '_';
    for (char d : word)
      if (!(std::isalnum(static_cast<unsigned char>(d)) || d == '_')) identish = false;
    if (identish && !alphabet_->has(word)) return {Token::Ident, word, line, col};
    return {Token::Symbol, word, line, col};
  }

 private:
  void skip_ws() {
    while (pos_ < text_->size() && std::isspace(static_cast<unsigned char>((*text_)[pos_])))
      advance();
  }
  void advance() {
    if ((*text_)[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string* text_;
  const Alphabet* alphabet_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
 public:
  Parser(const std::string& text, const Alphabet& alphabet) : lexer_(text, alphabet), alphabet_(alphabet) {
    shift();
  }

  NodePtr parse() {
    NodePtr f = parse_iff();
    expect(Token::End, "end of input");
    return f;
  }

 private:
  static bool lowercase_initial(const std::string& s) {
    return !s.empty() && (std::islower(static_cast<unsigned char>(s[0])) || s[0] == '_');
  }
  static bool reserved_dir(const std::string& s) {
    return s == "N" || s == "S" || s == "E" || s == "W";
  }

  NodePtr parse_iff() {
    NodePtr f = parse_implies();
    while (tok_.kind == Token::DArrow) {
      shift();
      NodePtr g = parse_implies();
      f = mk_iff(f, g);
    }
    return f;
  }

  NodePtr parse_implies() {
    NodePtr f = parse_or();
    if (tok_.kind == Token::Arrow) {
      shift();
      NodePtr g = parse_implies();  // right associative
      return mk_implies(f, g);
    }
    return f;
  }

  NodePtr parse_or() {
    NodePtr f = parse_and();
    while (tok_.kind == Token::Pipe) {
      shift();
      f = mk_or(f, parse_and());
    }
    return f;
  }

  NodePtr parse_and() {
    NodePtr f = parse_unary();
    while (tok_.kind == Token::Amp) {
      shift();
      f = mk_and(f, parse_unary());
    }
    return f;
  }

  NodePtr parse_unary() {
    if (tok_.kind == Token::Tilde) {
      shift();
      return mk_not(parse_unary());
    }
    if (tok_.kind == Token::Ident &&
        (tok_.text == "E" || tok_.text == "A" || tok_.text == "E1" || tok_.text == "A1")) {
      // Quantifier only when followed by a variable and a dot; a lone 'E('
      // is a direction application inside an atom.
      Token q = tok_;
      if (peek_is_quantifier_shape()) {
        shift();
        Token v = tok_;
        if (v.kind != Token::Ident)
          throw ParseError("expected a variable after quantifier", v.line, v.column);
        bool second = q.text == "E1" || q.text == "A1";
        if (second && lowercase_initial(v.text))
          throw ParseError("second-order variables are uppercase identifiers", v.line, v.column);
        if (!second && !lowercase_initial(v.text))
          throw ParseError("first-order variables are lowercase identifiers", v.line, v.column);
        if (reserved_dir(v.text))
          throw ParseError("N, S, E, W are reserved", v.line, v.column);
        shift();
        expect(Token::Dot, "'.' after quantified variable");
        NodePtr body = parse_iff();
        NodeKind k = q.text == "E"    ? NodeKind::Exists
                     : q.text == "A"  ? NodeKind::Forall
                     : q.text == "E1" ? NodeKind::Exists2
                                      : NodeKind::Forall2;
        return mk_quant(k, v.text, body);
      }
    }
    if (tok_.kind == Token::LParen) {
      shift();
      NodePtr f = parse_iff();
      expect(Token::RParen, "')'");
      return f;
    }
    return parse_atom();
  }

  bool peek_is_quantifier_shape() {
    // True when the current quantifier-looking token is followed by an
    // identifier, i.e. not by '(' as in the direction syntax E(t).
    Lexer save = lexer_;
    Token after = lexer_.next();
    lexer_ = save;
    return after.kind == Token::Ident || after.kind == Token::Symbol;
  }

  NodePtr parse_atom() {
    if (tok_.kind == Token::Symbol) {
      // colour '(' term ')'
      Token sym = tok_;
      shift();
      expect(Token::LParen, "'(' after colour symbol");
      Term t = parse_term();
      expect(Token::RParen, "')'");
      return mk_colour(sym.text, t);
    }
    if (tok_.kind != Token::Ident)
      throw ParseError("expected an atom", tok_.line, tok_.column);
    // Could still be an undeclared colour applied to a term: ident '(' term ')'
    // with ident not a direction is an undeclared-colour error.
    Term t = parse_term();
    if (tok_.kind == Token::EqSign) {
      shift();
      Term u = parse_term();
      return mk_eq(t, u);
    }
    if (tok_.kind == Token::Ident && tok_.text == "in") {
      shift();
      Token v = tok_;
      if (v.kind != Token::Ident || lowercase_initial(v.text))
        throw ParseError("membership needs an uppercase set variable", v.line, v.column);
      shift();
      return mk_member(t, v.text);
    }
    throw ParseError("expected '=', 'in', or a colour application", tok_.line, tok_.column);
  }

  Term parse_term() {
    Token t = tok_;
    if (t.kind != Token::Ident) throw ParseError("expected a term", t.line, t.column);
    if (reserved_dir(t.text)) {
      shift();
      expect(Token::LParen, "'(' after direction");
      Term inner = parse_term();
      expect(Token::RParen, "')'");
      Dir d = t.text == "N"   ? Dir::North
              : t.text == "S" ? Dir::South
              : t.text == "E" ? Dir::East
                              : Dir::West;
      return apply_dir(d, inner);
    }
    if (!lowercase_initial(t.text)) {
      throw ParseError("expected a first-order variable, got " + t.text, t.line, t.column);
    }
    shift();
    if (tok_.kind == Token::LParen)
      throw ParseError("undeclared colour symbol: " + t.text, t.line, t.column);
    return Term{t.text, {}};
  }

  void expect(Token::Kind k, const std::string& what) {
    if (tok_.kind != k)
      throw ParseError("expected " + what, tok_.line, tok_.column);
    shift();
  }
  void shift() { tok_ = lexer_.next(); }

  Lexer lexer_;
  Token tok_{Token::End, "", 0, 0};
  const Alphabet& alphabet_;
};

}  // namespace detail

inline Formula parse_formula(const std::string& text, const Alphabet& alphabet) {
  detail::Parser p(text, alphabet);
  return Formula{alphabet, p.parse()};
}

// Formula file: an optional leading `alphabet: ...` line, then the formula
// (possibly spanning several lines).
inline Formula parse_formula_file(const std::string& text) {
  std::istringstream in(text);
  std::string first;
  std::getline(in, first);
  auto toks = detail::split_ws(first);
  if (!toks.empty() && toks[0] == "alphabet:") {
    Alphabet alphabet(std::vector<std::string>(toks.begin() + 1, toks.end()));
    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_formula(rest, alphabet);
  }
  return parse_formula(text, Alphabet({"0", "1"}));
}

// --------------------------------------------------------------------------
// Transformations.

namespace detail {

inline NodePtr substitute_var(const NodePtr& f, const std::string& from, const std::string& to) {
  if (!f) return f;
  Node n = *f;
  auto fix = [&](Term& t) {
    if (t.var == from) t.var = to;
  };
  switch (f->kind) {
    case NodeKind::Eq:
      fix(n.t1);
      fix(n.t2);
      break;
    case NodeKind::Colour:
      fix(n.t1);
      break;
    case NodeKind::Member:
    case NodeKind::ConfigColour:
      fix(n.t1);
      if (n.var == from) n.var = to;
      break;
    case NodeKind::Exists:
    case NodeKind::Forall:
    case NodeKind::Exists2:
    case NodeKind::Forall2:
      if (f->var == from) return f;  // shadowed
      n.lhs = substitute_var(f->lhs, from, to);
      break;
    default:
      n.lhs = substitute_var(f->lhs, from, to);
      n.rhs = substitute_var(f->rhs, from, to);
      break;
  }
  return std::make_shared<Node>(std::move(n));
}

// Rename bound variables so that every quantifier binds a distinct name that
// also differs from every free name. Deterministic counter-based choices.
inline NodePtr rename_apart(const NodePtr& f, FreshNames& names) {
  if (!f) return f;
  switch (f->kind) {
    case NodeKind::Eq:
    case NodeKind::Colour:
    case NodeKind::Member:
    case NodeKind::ConfigColour:
      return f;
    case NodeKind::Not:
      return mk_not(rename_apart(f->lhs, names));
    case NodeKind::And:
      return mk_and(rename_apart(f->lhs, names), rename_apart(f->rhs, names));
    case NodeKind::Or:
      return mk_or(rename_apart(f->lhs, names), rename_apart(f->rhs, names));
    default: {
      std::string nv = names.fresh(f->var);
      NodePtr body = f->lhs;
      if (nv != f->var) body = substitute_var(body, f->var, nv);
      return mk_quant(f->kind, nv, rename_apart(body, names), f->config_alphabet);
    }
  }
}

}  // namespace detail

// Rewrites every term of depth >= 2 through fresh existential variables, so
// the result has radius <= 1. First-order formulas only. The new quantifier
// sits directly around the rewritten atom; the chain cell is unique, so the
// placement is equivalence-preserving under any surrounding connectives.
inline Formula reduce_radius_to_one(const Formula& f) {
  if (!is_first_order(f))
    throw std::invalid_argument("radius reduction handles first-order formulas only");
  std::set<std::string> taken;
  collect_variable_names(f.root, taken);
  FreshNames names(std::move(taken));

  std::function<NodePtr(const NodePtr&)> walk = [&](const NodePtr& g) -> NodePtr {
    if (!g) return g;
    switch (g->kind) {
      case NodeKind::Eq:
      case NodeKind::Colour:
      case NodeKind::Member: {
        // Peel one inner direction from the deepest term until radius <= 1.
        Node atom = *g;
        std::vector<std::pair<std::string, Term>> chain;  // fresh var = definition
        auto peel = [&](Term& t) {
          while (t.depth() >= 2) {
            Dir innermost = t.path.back();
            t.path.pop_back();
            std::string u = names.fresh("u");
            chain.emplace_back(u, apply_dir(innermost, Term{t.var, {}}));
            t.var = u;
          }
        };
        if (atom.kind == NodeKind::Eq) {
          peel(atom.t1);
          peel(atom.t2);
        } else {
          peel(atom.t1);
        }
        NodePtr out = std::make_shared<Node>(std::move(atom));
        for (auto it = chain.rbegin(); it != chain.rend(); ++it)
          out = mk_exists(it->first, mk_and(mk_eq(Term{it->first, {}}, it->second), out));
        return out;
      }
      case NodeKind::Not:
        return mk_not(walk(g->lhs));
      case NodeKind::And:
        return mk_and(walk(g->lhs), walk(g->rhs));
      case NodeKind::Or:
        return mk_or(walk(g->lhs), walk(g->rhs));
      default:
        return mk_quant(g->kind, g->var, walk(g->lhs), g->config_alphabet);
    }
  };
  if (radius(f) <= 1) return f;
  return Formula{f.alphabet, walk(f.root)};
}

// Prenex normal form for first-order formulas: quantifiers pulled to an
// outermost prefix over a quantifier-free matrix. Bound variables are renamed
// apart first, so pulling never captures.
inline Formula to_prenex(const Formula& f) {
  if (!is_first_order(f))
    throw std::invalid_argument("prenexing handles first-order formulas only");
  auto fv = free_variables(f);
  std::set<std::string> taken;
  collect_variable_names(f.root, taken);
  FreshNames names(std::move(taken));
  NodePtr renamed = detail::rename_apart(f.root, names);

  struct Pref {
    std::vector<std::pair<NodeKind, std::string>> prefix;
    NodePtr matrix;
  };
  std::function<Pref(const NodePtr&, bool)> walk = [&](const NodePtr& g, bool negated) -> Pref {
    switch (g->kind) {
      case NodeKind::Eq:
      case NodeKind::Colour:
      case NodeKind::Member:
        return {{}, negated ? mk_not(g) : g};
      case NodeKind::Not:
        return walk(g->lhs, !negated);
      case NodeKind::And:
      case NodeKind::Or: {
        Pref a = walk(g->lhs, negated);
        Pref b = walk(g->rhs, negated);
        bool conj = (g->kind == NodeKind::And) != negated;
        Pref out;
        out.prefix = std::move(a.prefix);
        out.prefix.insert(out.prefix.end(), b.prefix.begin(), b.prefix.end());
        out.matrix = conj ? mk_and(a.matrix, b.matrix) : mk_or(a.matrix, b.matrix);
        return out;
      }
      case NodeKind::Exists:
      case NodeKind::Forall: {
        Pref body = walk(g->lhs, negated);
        NodeKind k = g->kind;
        if (negated) k = (k == NodeKind::Exists) ? NodeKind::Forall : NodeKind::Exists;
        body.prefix.insert(body.prefix.begin(), {k, g->var});
        return body;
      }
      default:
        throw std::invalid_argument("prenexing handles first-order formulas only");
    }
  };
  Pref p = walk(renamed, false);
  NodePtr out = p.matrix;
  for (auto it = p.prefix.rbegin(); it != p.prefix.rend(); ++it)
    out = mk_quant(it->first, it->second, out);
  return Formula{f.alphabet, out};
}

inline bool is_prenex_first_order(const NodePtr& f) {
  NodePtr g = f;
  while (g && is_first_order_quantifier(g->kind)) g = g->lhs;
  return quantifier_count(g) == 0 && is_first_order(g);
}

// Splits a prenex first-order formula into its quantifier prefix and matrix.
inline std::pair<std::vector<std::pair<NodeKind, std::string>>, NodePtr> split_prenex(
    const NodePtr& f) {
  std::vector<std::pair<NodeKind, std::string>> prefix;
  NodePtr g = f;
  while (g && is_first_order_quantifier(g->kind)) {
    prefix.emplace_back(g->kind, g->var);
    g = g->lhs;
  }
  if (quantifier_count(g) != 0)
    throw std::invalid_argument("formula is not in prenex form");
  return {prefix, g};
}

namespace detail {

inline bool has_second_order(const NodePtr& f) {
  if (!f) return false;
  if (is_second_order_quantifier(f->kind)) return true;
  return has_second_order(f->lhs) || has_second_order(f->rhs);
}

// A first-order quantifier with a second-order quantifier somewhere inside
// its scope is out of order.
inline bool has_out_of_order(const NodePtr& f) {
  if (!f) return false;
  if (is_first_order_quantifier(f->kind) && has_second_order(f->lhs)) return true;
  return has_out_of_order(f->lhs) || has_out_of_order(f->rhs);
}

inline NodePtr singleton_constraint(const std::string& X, FreshNames& names) {
  std::string n = names.fresh("n");
  std::string m = names.fresh("m");
  // E n. A m. m in X <-> m = n
  return mk_exists(n, mk_forall(m, mk_iff(mk_member(Term{m, {}}, X), mk_eq(Term{m, {}}, Term{n, {}}))));
}

inline NodePtr rewrite_mixed_node(const NodePtr& f, FreshNames& names) {
  if (!f) return f;
  switch (f->kind) {
    case NodeKind::Eq:
    case NodeKind::Colour:
    case NodeKind::Member:
    case NodeKind::ConfigColour:
      return f;
    case NodeKind::Not:
      return mk_not(rewrite_mixed_node(f->lhs, names));
    case NodeKind::And:
      return mk_and(rewrite_mixed_node(f->lhs, names), rewrite_mixed_node(f->rhs, names));
    case NodeKind::Or:
      return mk_or(rewrite_mixed_node(f->lhs, names), rewrite_mixed_node(f->rhs, names));
    case NodeKind::Exists:
    case NodeKind::Forall: {
      NodePtr body = rewrite_mixed_node(f->lhs, names);
      if (!has_second_order(body))
        return mk_quant(f->kind, f->var, body);
      // Replace the out-of-order first-order variable with a second-order
      // variable constrained to be a singleton.
      std::string X;
      {
        std::string base = f->var;
        base[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(base[0])));
        X = names.fresh(base);
      }
      NodePtr singleton = singleton_constraint(X, names);
      NodePtr inner = mk_exists(f->var, mk_and(mk_member(Term{f->var, {}}, X), body));
      if (f->kind == NodeKind::Forall)
        return mk_forall2(X, mk_or(mk_not(singleton), inner));
      return mk_exists2(X, mk_and(singleton, inner));
    }
    case NodeKind::Exists2:
    case NodeKind::Forall2:
      return mk_quant(f->kind, f->var, rewrite_mixed_node(f->lhs, names), f->config_alphabet);
  }
  return f;
}

// Pulls second-order quantifiers over connectives to the outside; the body is
// already free of out-of-order first-order quantifiers.
inline NodePtr hoist_second_order(const NodePtr& f) {
  struct Pref {
    std::vector<std::pair<NodeKind, std::string>> prefix;
    NodePtr rest;
  };
  std::function<Pref(const NodePtr&, bool)> walk = [&](const NodePtr& g, bool negated) -> Pref {
    if (!g) return {{}, g};
    if (is_second_order_quantifier(g->kind)) {
      Pref body = walk(g->lhs, negated);
      NodeKind k = g->kind;
      if (negated) k = (k == NodeKind::Exists2) ? NodeKind::Forall2 : NodeKind::Exists2;
      body.prefix.insert(body.prefix.begin(), {k, g->var});
      return body;
    }
    switch (g->kind) {
      case NodeKind::Not:
        return walk(g->lhs, !negated);
      case NodeKind::And:
      case NodeKind::Or: {
        Pref a = walk(g->lhs, negated);
        Pref b = walk(g->rhs, negated);
        bool conj = (g->kind == NodeKind::And) != negated;
        Pref out;
        out.prefix = std::move(a.prefix);
        out.prefix.insert(out.prefix.end(), b.prefix.begin(), b.prefix.end());
        out.rest = conj ? mk_and(a.rest, b.rest) : mk_or(a.rest, b.rest);
        return out;
      }
      default: {
        // First-order quantifier or atom: stop hoisting, restore the negation.
        NodePtr rest = negated ? mk_not(g) : g;
        return {{}, rest};
      }
    }
  };
  Pref p = walk(f, false);
  NodePtr out = p.rest;
  for (auto it = p.prefix.rbegin(); it != p.prefix.rend(); ++it)
    out = mk_quant(it->first, it->second, out);
  return out;
}

}  // namespace detail

// Moves all second-order quantifiers outermost. First-order quantifiers that
// contain second-order ones in scope are replaced by singleton-constrained
// second-order variables; pure first-order formulas are returned untouched.
inline Formula rewrite_mixed_order(const Formula& f) {
  if (!detail::has_out_of_order(f.root)) {
    if (!detail::has_second_order(f.root)) return f;  // pure FO untouched
    std::set<std::string> taken;
    collect_variable_names(f.root, taken);
    FreshNames names(std::move(taken));
    NodePtr renamed = detail::rename_apart(f.root, names);
    return Formula{f.alphabet, detail::hoist_second_order(renamed)};
  }
  std::set<std::string> taken;
  collect_variable_names(f.root, taken);
  FreshNames names(std::move(taken));
  NodePtr renamed = detail::rename_apart(f.root, names);
  NodePtr rewritten = detail::rewrite_mixed_node(renamed, names);
  return Formula{f.alphabet, detail::hoist_second_order(rewritten)};
}

// Classifies a formula in second-order prenex form (apply rewrite_mixed_order
// first). FO when there is no second-order quantifier; otherwise the least
// class determined by the alternation blocks of the prefix.
inline HierarchyLevel classify_hierarchy(const Formula& f) {
  NodePtr g = f.root;
  if (!detail::has_second_order(g)) return {HierarchyLevel::Tag::FO, 0};
  int blocks = 0;
  std::optional<NodeKind> current;
  NodeKind first = NodeKind::Eq;
  while (g && is_second_order_quantifier(g->kind)) {
    if (!current || *current != g->kind) {
      if (!current) first = g->kind;
      current = g->kind;
      ++blocks;
    }
    g = g->lhs;
  }
  if (detail::has_second_order(g))
    throw std::invalid_argument("formula is not in second-order prenex form");
  if (first == NodeKind::Exists2) return {HierarchyLevel::Tag::SigmaBar, blocks};
  return {HierarchyLevel::Tag::PiBar, blocks};
}

// Replaces a quantifier over configurations of `inner_alphabet` by one set
// variable per colour, a partition constraint, and membership atoms in place
// of the configuration's colour predicates.
inline Formula encode_config_quantifier(const Formula& f, const std::string& var,
                                        const Alphabet& inner_alphabet) {
  std::set<std::string> taken;
  collect_variable_names(f.root, taken);
  FreshNames names(std::move(taken));

  std::vector<std::string> set_names;
  for (std::size_t c = 0; c < inner_alphabet.size(); ++c)
    set_names.push_back(names.fresh(var + std::to_string(c)));

  std::function<NodePtr(const NodePtr&)> strip = [&](const NodePtr& g) -> NodePtr {
    if (!g) return g;
    if (g->kind == NodeKind::ConfigColour && g->var == var) {
      Colour c = inner_alphabet.index(g->symbol);
      return mk_member(g->t1, set_names[c]);
    }
    Node n = *g;
    n.lhs = strip(g->lhs);
    n.rhs = strip(g->rhs);
    return std::make_shared<Node>(std::move(n));
  };

  std::function<NodePtr(const NodePtr&)> walk = [&](const NodePtr& g) -> NodePtr {
    if (!g) return g;
    if (is_second_order_quantifier(g->kind) && g->var == var && g->config_alphabet) {
      NodePtr body = strip(g->lhs);
      std::string v = names.fresh("v");
      // Exactly one colour per cell.
      NodePtr any = mk_member(Term{v, {}}, set_names[0]);
      for (std::size_t c = 1; c < set_names.size(); ++c)
        any = mk_or(any, mk_member(Term{v, {}}, set_names[c]));
      NodePtr uniq = nullptr;
      for (std::size_t c = 0; c < set_names.size(); ++c)
        for (std::size_t d = c + 1; d < set_names.size(); ++d) {
          NodePtr clash =
              mk_not(mk_and(mk_member(Term{v, {}}, set_names[c]), mk_member(Term{v, {}}, set_names[d])));
          uniq = uniq ? mk_and(uniq, clash) : clash;
        }
      NodePtr partition = uniq ? mk_forall(v, mk_and(any, uniq)) : mk_forall(v, any);
      NodePtr out;
      if (g->kind == NodeKind::Exists2)
        out = mk_and(partition, body);
      else
        out = mk_or(mk_not(partition), body);
      NodeKind k = g->kind;
      for (auto it = set_names.rbegin(); it != set_names.rend(); ++it)
        out = mk_quant(k, *it, out);
      return out;
    }
    Node n = *g;
    n.lhs = walk(g->lhs);
    n.rhs = walk(g->rhs);
    return std::make_shared<Node>(std::move(n));
  };

  return Formula{f.alphabet, walk(f.root)};
}

// --------------------------------------------------------------------------
// Built-in formulas.

inline Alphabet squares_alphabet() { return Alphabet({"□", "■"}); }

// fin(E): true iff the free set E is finite. E N. E S. phi1 & ... & phi5.
inline Formula builtin_fin() {
  Alphabet a = squares_alphabet();
  Term v{"v", {}};
  auto inN = [&](Term t) { return mk_member(t, "N"); };
  auto inS = [&](Term t) { return mk_member(t, "S"); };
  NodePtr phi1 = mk_forall(
      "v", mk_iff(inN(v), mk_and(inN(apply_dir(Dir::West, v)), inN(apply_dir(Dir::South, v)))));
  NodePtr phi2 = mk_forall(
      "v", mk_iff(inS(v), mk_and(inS(apply_dir(Dir::East, v)), inS(apply_dir(Dir::North, v)))));
  NodePtr phi3 = mk_exists(
      "v", mk_and(inN(v), mk_and(mk_not(inN(apply_dir(Dir::North, v))),
                                 mk_not(inN(apply_dir(Dir::East, v))))));
  NodePtr phi4 = mk_exists(
      "v", mk_and(inS(v), mk_and(mk_not(inS(apply_dir(Dir::South, v))),
                                 mk_not(inS(apply_dir(Dir::West, v))))));
  NodePtr phi5 = mk_forall("v", mk_implies(mk_member(v, "E"), mk_and(inN(v), inS(v))));
  NodePtr body = mk_and(phi1, mk_and(phi2, mk_and(phi3, mk_and(phi4, phi5))));
  return Formula{a, mk_exists2("N", mk_exists2("S", body))};
}

// Stable(X): membership is constant along rows.
inline Formula builtin_stable() {
  Alphabet a = squares_alphabet();
  Term n{"n", {}};
  NodePtr body = mk_forall("n", mk_iff(mk_member(n, "X"), mk_member(apply_dir(Dir::East, n), "X")));
  return Formula{a, body};
}

namespace detail {
inline NodePtr stable_node(const std::string& X, const std::string& n) {
  Term t{n, {}};
  return mk_forall(n, mk_iff(mk_member(t, X), mk_member(apply_dir(Dir::East, t), X)));
}
inline NodePtr line_node() {
  // Stable(X) & ((Stable(Y) & (E n. n in X & n in Y)) -> (A n. n in X -> n in Y))
  Term n{"n", {}};
  NodePtr shareds = mk_exists("n", mk_and(mk_member(n, "X"), mk_member(n, "Y")));
  NodePtr contained = mk_forall("n", mk_implies(mk_member(n, "X"), mk_member(n, "Y")));
  return mk_and(stable_node("X", "n"),
                mk_implies(mk_and(stable_node("Y", "n"), shareds), contained));
}
}  // namespace detail

// All marked cells lie on one common row: E1 X. A1 Y. Line(X,Y) & (A n. ■(n) -> n in X).
inline Formula builtin_line() {
  Alphabet a = squares_alphabet();
  Term n{"n", {}};
  NodePtr marked = mk_forall("n", mk_implies(mk_colour("■", n), mk_member(n, "X")));
  NodePtr body = mk_and(detail::line_node(), marked);
  return Formula{a, mk_exists2("X", mk_forall2("Y", body))};
}

// Exactly one cell is marked: E x. A y. ■(y) <-> y = x.
inline Formula builtin_exnonsub() {
  Alphabet a = squares_alphabet();
  Term x{"x", {}}, y{"y", {}};
  NodePtr body = mk_forall("y", mk_iff(mk_colour("■", y), mk_eq(y, x)));
  return Formula{a, mk_exists("x", body)};
}

inline Formula builtin_formula(const std::string& name) {
  if (name == "fin") return builtin_fin();
  if (name == "line") return builtin_line();
  if (name == "exnonsub") return builtin_exnonsub();
  if (name == "stable") return builtin_stable();
  throw std::invalid_argument("unknown builtin formula: " + name);
}

}  // namespace mso2d
