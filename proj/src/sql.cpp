#include "pdex/sql.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include "pdex/error.hpp"

namespace pdex {

namespace {

enum class Tok { ident, number, string, symbol, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return cur_; }

  Token take() {
    Token t = cur_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::parse_error, msg + " at offset " + std::to_string(cur_.pos));
  }

  bool keyword(std::string_view kw) const {
    if (cur_.kind != Tok::ident || cur_.text.size() != kw.size()) return false;
    for (std::size_t i = 0; i < kw.size(); ++i) {
      if (std::toupper(static_cast<unsigned char>(cur_.text[i])) != kw[i]) return false;
    }
    return true;
  }

  bool accept_keyword(std::string_view kw) {
    if (!keyword(kw)) return false;
    advance();
    return true;
  }

  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail("expected " + std::string(kw));
  }

  bool symbol(std::string_view s) const { return cur_.kind == Tok::symbol && cur_.text == s; }

  bool accept_symbol(std::string_view s) {
    if (!symbol(s)) return false;
    advance();
    return true;
  }

  void expect_symbol(std::string_view s) {
    if (!accept_symbol(s)) fail("expected '" + std::string(s) + "'");
  }

  std::string identifier() {
    if (cur_.kind != Tok::ident) fail("expected identifier");
    return take().text;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    cur_ = Token{};
    cur_.pos = pos_;
    if (pos_ >= src_.size()) return;
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
      cur_.kind = Tok::ident;
      cur_.text = std::string(src_.substr(start, pos_ - start));
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        ((c == '-' || c == '.') && pos_ + 1 < src_.size() &&
         (std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '.'))) {
      std::size_t start = pos_;
      if (src_[pos_] == '-') ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
      cur_.kind = Tok::number;
      cur_.text = std::string(src_.substr(start, pos_ - start));
      return;
    }
    if (c == '\'') {
      std::string s;
      ++pos_;
      for (;;) {
        if (pos_ >= src_.size()) throw Error(ErrorCode::parse_error, "unterminated string literal");
        if (src_[pos_] == '\'') {
          if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '\'') {
            s.push_back('\'');
            pos_ += 2;
            continue;
          }
          ++pos_;
          break;
        }
        s.push_back(src_[pos_++]);
      }
      cur_.kind = Tok::string;
      cur_.text = std::move(s);
      return;
    }
    if (std::string_view("(),*=<>;").find(c) != std::string_view::npos) {
      cur_.kind = Tok::symbol;
      cur_.text = std::string(1, c);
      ++pos_;
      return;
    }
    throw Error(ErrorCode::parse_error, std::string("unexpected character '") + c + "' at offset " +
                                            std::to_string(pos_));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token cur_;
};

Value parse_number(const Lexer& lx, const std::string& text) {
  bool is_float = text.find_first_of(".eE") != std::string::npos;
  if (!is_float) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) lx.fail("integer literal out of range: " + text);
    return v;
  }
  char* end = nullptr;
  double d = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) lx.fail("bad number literal: " + text);
  return d;
}

Value parse_literal(Lexer& lx, bool allow_null) {
  const Token& t = lx.peek();
  if (t.kind == Tok::number) {
    auto text = lx.take().text;
    return parse_number(lx, text);
  }
  if (t.kind == Tok::string) return lx.take().text;
  if (allow_null && lx.accept_keyword("NULL")) return Value{};
  lx.fail("expected literal");
}

Atom parse_atom(Lexer& lx) {
  Atom a;
  a.column = lx.identifier();
  if (lx.accept_symbol("=")) {
    a.op = CompareOp::eq;
    a.lo = parse_literal(lx, false);
  } else if (lx.accept_symbol("<")) {
    a.op = CompareOp::lt;
    a.lo = parse_literal(lx, false);
  } else if (lx.accept_symbol(">")) {
    a.op = CompareOp::gt;
    a.lo = parse_literal(lx, false);
  } else if (lx.accept_keyword("BETWEEN")) {
    a.op = CompareOp::between;
    a.lo = parse_literal(lx, false);
    lx.expect_keyword("AND");
    a.hi = parse_literal(lx, false);
  } else if (lx.accept_keyword("IS")) {
    a.op = lx.accept_keyword("NOT") ? CompareOp::is_not_null : CompareOp::is_null;
    lx.expect_keyword("NULL");
  } else {
    lx.fail("expected comparison operator");
  }
  return a;
}

Conjunction parse_atoms(Lexer& lx) {
  Conjunction conj;
  conj.push_back(parse_atom(lx));
  while (lx.accept_keyword("AND")) conj.push_back(parse_atom(lx));
  return conj;
}

Conjunction parse_where(Lexer& lx) {
  if (lx.accept_keyword("WHERE")) return parse_atoms(lx);
  return {};
}

void expect_end(Lexer& lx) {
  lx.accept_symbol(";");
  if (lx.peek().kind != Tok::end) lx.fail("unexpected trailing input");
}

Query parse_select(Lexer& lx) {
  Query q;
  lx.expect_keyword("SELECT");
  if (lx.accept_symbol("*")) {
    // empty projection
  } else if (lx.keyword("COUNT")) {
    lx.take();
    lx.expect_symbol("(");
    lx.expect_symbol("*");
    lx.expect_symbol(")");
    q.aggregate = Aggregate{AggregateFn::count, {}};
  } else if (lx.keyword("SUM")) {
    lx.take();
    lx.expect_symbol("(");
    q.aggregate = Aggregate{AggregateFn::sum, lx.identifier()};
    lx.expect_symbol(")");
  } else {
    q.projected.push_back(lx.identifier());
    while (lx.accept_symbol(",")) q.projected.push_back(lx.identifier());
  }
  lx.expect_keyword("FROM");
  q.table = lx.identifier();
  q.where = parse_where(lx);
  return q;
}

}  // namespace

Query parse_query(std::string_view text) {
  Lexer lx(text);
  Query q = parse_select(lx);
  expect_end(lx);
  return q;
}

Statement parse_statement(std::string_view text) {
  Lexer lx(text);
  if (lx.keyword("SELECT")) {
    Query q = parse_select(lx);
    expect_end(lx);
    return q;
  }
  if (lx.accept_keyword("INSERT")) {
    InsertStatement s;
    lx.expect_keyword("INTO");
    s.table = lx.identifier();
    lx.expect_keyword("VALUES");
    do {
      lx.expect_symbol("(");
      Row row;
      row.push_back(parse_literal(lx, true));
      while (lx.accept_symbol(",")) row.push_back(parse_literal(lx, true));
      lx.expect_symbol(")");
      s.rows.push_back(std::move(row));
    } while (lx.accept_symbol(","));
    expect_end(lx);
    return s;
  }
  if (lx.accept_keyword("UPDATE")) {
    UpdateStatement s;
    s.table = lx.identifier();
    lx.expect_keyword("SET");
    do {
      Assignment a;
      a.column = lx.identifier();
      lx.expect_symbol("=");
      a.value = parse_literal(lx, true);
      s.assignments.push_back(std::move(a));
    } while (lx.accept_symbol(","));
    s.where = parse_where(lx);
    expect_end(lx);
    return s;
  }
  if (lx.accept_keyword("DELETE")) {
    DeleteStatement s;
    lx.expect_keyword("FROM");
    s.table = lx.identifier();
    s.where = parse_where(lx);
    expect_end(lx);
    return s;
  }
  lx.fail("expected SELECT, INSERT, UPDATE or DELETE");
}

Conjunction parse_conjunction(std::string_view text) {
  Lexer lx(text);
  Conjunction c = parse_atoms(lx);
  expect_end(lx);
  return c;
}

std::string render_query(const Query& q) {
  std::string out = "SELECT ";
  if (q.aggregate) {
    out += q.aggregate->fn == AggregateFn::count ? "COUNT(*)" : "SUM(" + q.aggregate->column + ")";
  } else if (q.projected.empty()) {
    out += "*";
  } else {
    for (std::size_t i = 0; i < q.projected.size(); ++i) {
      if (i) out += ", ";
      out += q.projected[i];
    }
  }
  out += " FROM " + q.table;
  if (!q.where.empty()) out += " WHERE " + render_conjunction(q.where);
  return out;
}

}  // namespace pdex
