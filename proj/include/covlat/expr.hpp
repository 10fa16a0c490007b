#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "covlat/lattice.hpp"

namespace covlat {

// ---------------------------------------------------------------------------
// Analytic expressions over the variables {t, x}.
//
// Grammar (standard infix, whitespace insignificant):
//   expr   := term  (('+'|'-') term)*          left-associative
//   term   := unary (('*'|'/') unary)*         left-associative
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?                right-associative, binds above unary '-'
//   atom   := number | 't' | 'x' | func '(' expr ')' | '(' expr ')'
//   func   := 'sin' | 'cos' | 'exp' | 'tanh'
//
// Evaluation is total for finite (t, x) except division by zero and invalid
// powers, which are reported errors.  Exact first (and second) partial
// derivatives come from forward-mode dual numbers.
// ---------------------------------------------------------------------------

enum class ExprKind { Number, VarT, VarX, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Tanh };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprKind kind;
    double number = 0.0; // Number only
    ExprPtr a, b;        // operands (b for binary ops)
};

class ParseError : public Error {
public:
    ParseError(std::string msg, std::size_t offset, std::vector<std::string> expected)
        : Error(std::move(msg)), offset_(offset), expected_(std::move(expected)) {}
    std::size_t offset() const { return offset_; }
    const std::vector<std::string>& expected() const { return expected_; }

private:
    std::size_t offset_;
    std::vector<std::string> expected_;
};

class EvalError : public Error {
public:
    using Error::Error;
};

// --- node constructors ------------------------------------------------------

inline ExprPtr expr_number(double v) {
    return std::make_shared<Expr>(Expr{ExprKind::Number, v, nullptr, nullptr});
}
inline ExprPtr expr_t() { return std::make_shared<Expr>(Expr{ExprKind::VarT, 0, nullptr, nullptr}); }
inline ExprPtr expr_x() { return std::make_shared<Expr>(Expr{ExprKind::VarX, 0, nullptr, nullptr}); }

inline ExprPtr expr_binary(ExprKind k, ExprPtr a, ExprPtr b) {
    return std::make_shared<Expr>(Expr{k, 0, std::move(a), std::move(b)});
}

/// Unary minus; negative literals are folded so that "-2" and expr_neg(2)
/// produce the identical AST.
inline ExprPtr expr_neg(ExprPtr a) {
    if (a->kind == ExprKind::Number) return expr_number(-a->number);
    return std::make_shared<Expr>(Expr{ExprKind::Neg, 0, std::move(a), nullptr});
}

inline ExprPtr expr_unary(ExprKind k, ExprPtr a) {
    if (k == ExprKind::Neg) return expr_neg(std::move(a));
    return std::make_shared<Expr>(Expr{k, 0, std::move(a), nullptr});
}

// --- dual numbers -----------------------------------------------------------

namespace detail {

/// Forward-mode dual carrying value and first partials w.r.t. (t, x).
struct Dual {
    double v = 0, dt = 0, dx = 0;
    static Dual constant(double c) { return {c, 0, 0}; }
};

/// Second-order dual: value, gradient and Hessian w.r.t. (t, x).
struct Dual2 {
    double v = 0, dt = 0, dx = 0, dtt = 0, dtx = 0, dxx = 0;
    static Dual2 constant(double c) { return {c, 0, 0, 0, 0, 0}; }
};

inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.dt + b.dt, a.dx + b.dx}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.dt - b.dt, a.dx - b.dx}; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.dt, -a.dx}; }
inline Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.dt * b.v + a.v * b.dt, a.dx * b.v + a.v * b.dx};
}
inline Dual operator/(const Dual& a, const Dual& b) {
    if (b.v == 0.0) throw EvalError("division by zero");
    const double inv = 1.0 / b.v;
    const double q = a.v * inv;
    return {q, (a.dt - q * b.dt) * inv, (a.dx - q * b.dx) * inv};
}

/// Chain rule for a scalar function with derivatives f', f''(unused here).
inline Dual apply(const Dual& u, double f, double f1) { return {f, f1 * u.dt, f1 * u.dx}; }

inline Dual2 operator+(const Dual2& a, const Dual2& b) {
    return {a.v + b.v, a.dt + b.dt, a.dx + b.dx, a.dtt + b.dtt, a.dtx + b.dtx, a.dxx + b.dxx};
}
inline Dual2 operator-(const Dual2& a, const Dual2& b) {
    return {a.v - b.v, a.dt - b.dt, a.dx - b.dx, a.dtt - b.dtt, a.dtx - b.dtx, a.dxx - b.dxx};
}
inline Dual2 operator-(const Dual2& a) { return {-a.v, -a.dt, -a.dx, -a.dtt, -a.dtx, -a.dxx}; }
inline Dual2 operator*(const Dual2& a, const Dual2& b) {
    return {a.v * b.v,
            a.dt * b.v + a.v * b.dt,
            a.dx * b.v + a.v * b.dx,
            a.dtt * b.v + 2 * a.dt * b.dt + a.v * b.dtt,
            a.dtx * b.v + a.dt * b.dx + a.dx * b.dt + a.v * b.dtx,
            a.dxx * b.v + 2 * a.dx * b.dx + a.v * b.dxx};
}
inline Dual2 apply(const Dual2& u, double f, double f1, double f2) {
    return {f,
            f1 * u.dt,
            f1 * u.dx,
            f2 * u.dt * u.dt + f1 * u.dtt,
            f2 * u.dt * u.dx + f1 * u.dtx,
            f2 * u.dx * u.dx + f1 * u.dxx};
}
inline Dual2 operator/(const Dual2& a, const Dual2& b) {
    if (b.v == 0.0) throw EvalError("division by zero");
    const double iv = 1.0 / b.v;
    return a * apply(b, iv, -iv * iv, 2.0 * iv * iv * iv);
}

inline Dual sin(const Dual& u) { return apply(u, std::sin(u.v), std::cos(u.v)); }
inline Dual cos(const Dual& u) { return apply(u, std::cos(u.v), -std::sin(u.v)); }
inline Dual exp(const Dual& u) { return apply(u, std::exp(u.v), std::exp(u.v)); }
inline Dual tanh(const Dual& u) {
    const double th = std::tanh(u.v);
    return apply(u, th, 1.0 - th * th);
}
inline Dual log(const Dual& u) {
    if (!(u.v > 0.0)) throw EvalError("logarithm of non-positive value in power evaluation");
    return apply(u, std::log(u.v), 1.0 / u.v);
}

inline Dual2 sin(const Dual2& u) { return apply(u, std::sin(u.v), std::cos(u.v), -std::sin(u.v)); }
inline Dual2 cos(const Dual2& u) { return apply(u, std::cos(u.v), -std::sin(u.v), -std::cos(u.v)); }
inline Dual2 exp(const Dual2& u) {
    const double e = std::exp(u.v);
    return apply(u, e, e, e);
}
inline Dual2 tanh(const Dual2& u) {
    const double th = std::tanh(u.v);
    const double s = 1.0 - th * th;
    return apply(u, th, s, -2.0 * th * s);
}
inline Dual2 log(const Dual2& u) {
    if (!(u.v > 0.0)) throw EvalError("logarithm of non-positive value in power evaluation");
    const double iv = 1.0 / u.v;
    return apply(u, std::log(u.v), iv, -iv * iv);
}

inline bool deriv_free(const Dual& d) { return d.dt == 0 && d.dx == 0; }
inline bool deriv_free(const Dual2& d) {
    return d.dt == 0 && d.dx == 0 && d.dtt == 0 && d.dtx == 0 && d.dxx == 0;
}

template <class D>
D pow(const D& a, const D& b) {
    if (deriv_free(b)) {
        // constant exponent: power rule, valid for negative bases too
        const double c = b.v;
        const double f = std::pow(a.v, c);
        const double f1 = c * std::pow(a.v, c - 1.0);
        if constexpr (std::is_same_v<D, Dual>) {
            return apply(a, f, f1);
        } else {
            const double f2 = c * (c - 1.0) * std::pow(a.v, c - 2.0);
            return apply(a, f, f1, f2);
        }
    }
    return exp(b * log(a)); // requires positive base
}

template <class D>
D eval_node(const Expr& e, const D& t, const D& x) {
    switch (e.kind) {
        case ExprKind::Number: return D::constant(e.number);
        case ExprKind::VarT: return t;
        case ExprKind::VarX: return x;
        case ExprKind::Add: return eval_node(*e.a, t, x) + eval_node(*e.b, t, x);
        case ExprKind::Sub: return eval_node(*e.a, t, x) - eval_node(*e.b, t, x);
        case ExprKind::Mul: return eval_node(*e.a, t, x) * eval_node(*e.b, t, x);
        case ExprKind::Div: return eval_node(*e.a, t, x) / eval_node(*e.b, t, x);
        case ExprKind::Pow: return pow(eval_node(*e.a, t, x), eval_node(*e.b, t, x));
        case ExprKind::Neg: return -eval_node(*e.a, t, x);
        case ExprKind::Sin: return sin(eval_node(*e.a, t, x));
        case ExprKind::Cos: return cos(eval_node(*e.a, t, x));
        case ExprKind::Exp: return exp(eval_node(*e.a, t, x));
        case ExprKind::Tanh: return tanh(eval_node(*e.a, t, x));
    }
    throw EvalError("corrupt expression node");
}

} // namespace detail

// --- evaluation -------------------------------------------------------------

struct EvalGrad {
    double value = 0, dt = 0, dx = 0;
};

struct EvalGrad2 {
    double value = 0, dt = 0, dx = 0, dtt = 0, dtx = 0, dxx = 0;
};

/// Plain value.
inline double eval(const Expr& e, double t, double x) {
    const detail::Dual r = detail::eval_node(e, detail::Dual{t, 1, 0}, detail::Dual{x, 0, 1});
    if (!std::isfinite(r.v)) throw EvalError("non-finite expression value");
    return r.v;
}

/// Value plus exact first partials (forward-mode duals).
inline EvalGrad eval_with_grad(const Expr& e, double t, double x) {
    const detail::Dual r = detail::eval_node(e, detail::Dual{t, 1, 0}, detail::Dual{x, 0, 1});
    if (!std::isfinite(r.v) || !std::isfinite(r.dt) || !std::isfinite(r.dx))
        throw EvalError("non-finite expression value or derivative");
    return {r.v, r.dt, r.dx};
}

/// Value, first and second partials.
inline EvalGrad2 eval_with_grad2(const Expr& e, double t, double x) {
    const detail::Dual2 r =
        detail::eval_node(e, detail::Dual2{t, 1, 0, 0, 0, 0}, detail::Dual2{x, 0, 1, 0, 0, 0});
    if (!std::isfinite(r.v) || !std::isfinite(r.dt) || !std::isfinite(r.dx) ||
        !std::isfinite(r.dtt) || !std::isfinite(r.dtx) || !std::isfinite(r.dxx))
        throw EvalError("non-finite expression value or derivative");
    return {r.v, r.dt, r.dx, r.dtt, r.dtx, r.dxx};
}

// --- parser -----------------------------------------------------------------

namespace detail {

struct Token {
    enum Kind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End } kind;
    std::size_t offset;
    double number = 0;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        tok_.offset = pos_;
        if (pos_ >= src_.size()) {
            tok_.kind = Token::End;
            return;
        }
        const char c = src_[pos_];
        switch (c) {
            case '+': tok_.kind = Token::Plus; ++pos_; return;
            case '-': tok_.kind = Token::Minus; ++pos_; return;
            case '*': tok_.kind = Token::Star; ++pos_; return;
            case '/': tok_.kind = Token::Slash; ++pos_; return;
            case '^': tok_.kind = Token::Caret; ++pos_; return;
            case '(': tok_.kind = Token::LParen; ++pos_; return;
            case ')': tok_.kind = Token::RParen; ++pos_; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = src_.data() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin)
                throw ParseError("malformed number at offset " + std::to_string(pos_), pos_,
                                 {"number"});
            tok_.kind = Token::Number;
            tok_.number = v;
            pos_ += static_cast<std::size_t>(end - begin);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = pos_;
            while (j < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
                ++j;
            tok_.kind = Token::Ident;
            tok_.text.assign(src_.substr(pos_, j - pos_));
            pos_ = j;
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "' at offset " +
                             std::to_string(pos_),
                         pos_, {"expression"});
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Token tok_;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) {}

    ExprPtr parse() {
        ExprPtr e = parse_expr();
        if (lex_.peek().kind != Token::End)
            fail("trailing input", {"operator", "end of input"});
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) {
        throw ParseError(what + " at offset " + std::to_string(lex_.peek().offset), lex_.peek().offset,
                         std::move(expected));
    }

    ExprPtr parse_expr() {
        ExprPtr e = parse_term();
        while (true) {
            const auto k = lex_.peek().kind;
            if (k == Token::Plus || k == Token::Minus) {
                lex_.take();
                e = expr_binary(k == Token::Plus ? ExprKind::Add : ExprKind::Sub, e, parse_term());
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_term() {
        ExprPtr e = parse_unary();
        while (true) {
            const auto k = lex_.peek().kind;
            if (k == Token::Star || k == Token::Slash) {
                lex_.take();
                e = expr_binary(k == Token::Star ? ExprKind::Mul : ExprKind::Div, e, parse_unary());
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_unary() {
        if (lex_.peek().kind == Token::Minus) {
            lex_.take();
            return expr_neg(parse_unary());
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_atom();
        if (lex_.peek().kind == Token::Caret) {
            lex_.take();
            return expr_binary(ExprKind::Pow, base, parse_unary());
        }
        return base;
    }

    ExprPtr parse_atom() {
        const Token t = lex_.peek();
        switch (t.kind) {
            case Token::Number:
                lex_.take();
                return expr_number(t.number);
            case Token::LParen: {
                lex_.take();
                ExprPtr e = parse_expr();
                if (lex_.peek().kind != Token::RParen) fail("unbalanced parenthesis", {")"});
                lex_.take();
                return e;
            }
            case Token::Ident: {
                lex_.take();
                if (t.text == "t") return expr_t();
                if (t.text == "x") return expr_x();
                ExprKind fk;
                if (t.text == "sin") fk = ExprKind::Sin;
                else if (t.text == "cos") fk = ExprKind::Cos;
                else if (t.text == "exp") fk = ExprKind::Exp;
                else if (t.text == "tanh") fk = ExprKind::Tanh;
                else
                    throw ParseError("unknown identifier '" + t.text + "' at offset " +
                                         std::to_string(t.offset),
                                     t.offset, {"t", "x", "sin", "cos", "exp", "tanh"});
                if (lex_.peek().kind != Token::LParen) fail("expected '(' after function name", {"("});
                lex_.take();
                ExprPtr arg = parse_expr();
                if (lex_.peek().kind != Token::RParen) fail("unbalanced parenthesis", {")"});
                lex_.take();
                return expr_unary(fk, arg);
            }
            default:
                fail("expected an operand", {"number", "t", "x", "function", "("});
        }
    }

    Lexer lex_;
};

} // namespace detail

inline ExprPtr parse_expr(std::string_view source) { return detail::Parser(source).parse(); }

// --- printing and structural comparison --------------------------------------

namespace detail {

// precedence: + - (1) < * / (2) < unary - (3) < ^ (4) < atoms (5)
inline int precedence(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Add:
        case ExprKind::Sub: return 1;
        case ExprKind::Mul:
        case ExprKind::Div: return 2;
        case ExprKind::Neg: return 3;
        case ExprKind::Pow: return 4;
        case ExprKind::Number: return e.number < 0 ? 3 : 5; // "-2" lexes as unary minus
        default: return 5;
    }
}

inline void print_node(const Expr& e, std::string& out);

inline void print_child(const Expr& child, int min_prec, std::string& out) {
    if (precedence(child) < min_prec) {
        out += '(';
        print_node(child, out);
        out += ')';
    } else {
        print_node(child, out);
    }
}

inline void print_node(const Expr& e, std::string& out) {
    char buf[40];
    switch (e.kind) {
        case ExprKind::Number:
            std::snprintf(buf, sizeof buf, "%.17g", e.number);
            out += buf;
            return;
        case ExprKind::VarT: out += 't'; return;
        case ExprKind::VarX: out += 'x'; return;
        case ExprKind::Add:
            print_child(*e.a, 1, out);
            out += " + ";
            print_child(*e.b, 2, out);
            return;
        case ExprKind::Sub:
            print_child(*e.a, 1, out);
            out += " - ";
            print_child(*e.b, 2, out);
            return;
        case ExprKind::Mul:
            print_child(*e.a, 2, out);
            out += '*';
            print_child(*e.b, 3, out);
            return;
        case ExprKind::Div:
            print_child(*e.a, 2, out);
            out += '/';
            print_child(*e.b, 3, out);
            return;
        case ExprKind::Neg:
            out += '-';
            print_child(*e.a, 3, out);
            return;
        case ExprKind::Pow:
            print_child(*e.a, 5, out);
            out += '^';
            print_child(*e.b, 3, out);
            return;
        case ExprKind::Sin: out += "sin("; break;
        case ExprKind::Cos: out += "cos("; break;
        case ExprKind::Exp: out += "exp("; break;
        case ExprKind::Tanh: out += "tanh("; break;
    }
    print_node(*e.a, out);
    out += ')';
}

} // namespace detail

/// Pretty-print with minimal parentheses; re-parsing yields a structurally
/// identical AST.
inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print_node(e, out);
    return out;
}

inline bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == ExprKind::Number) return a.number == b.number;
    if (a.a && (!b.a || !structurally_equal(*a.a, *b.a))) return false;
    if (!a.a && b.a) return false;
    if (a.b && (!b.b || !structurally_equal(*a.b, *b.b))) return false;
    if (!a.b && b.b) return false;
    return true;
}

} // namespace covlat
