#pragma once

#include "unidiff/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace unidiff {

/**
 * Arithmetic expressions over x, y, t used for initial data and forcing.
 *
 *     expr    := term (('+' | '-') term)*
 *     term    := unary (('*' | '/') unary)*
 *     unary   := '-' unary | power
 *     power   := primary ('^' unary)?          right associative
 *     primary := number | 'x' | 'y' | 't' | 'pi'
 *              | name '(' expr (',' expr)* ')' | '(' expr ')'
 *
 * Functions: sin cos exp abs (one argument), min max (two), pos(s) = max(s, 0),
 * neg(s) = min(s, 0), step(s) = 1 if s >= 0 else 0. Division by zero is an
 * evaluation error.
 */
class Expression {
public:
    enum class Kind { Number, X, Y, T, Pi, Negate, Add, Sub, Mul, Div, Pow, Call };
    enum class Function { Sin, Cos, Exp, Abs, Min, Max, Pos, Neg, Step };

    struct Node {
        Kind kind = Kind::Number;
        double value = 0.0;
        Function function = Function::Sin;
        std::vector<std::shared_ptr<const Node>> children;
    };

    Expression() : root_(std::make_shared<Node>()) {}
    explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

    double evaluate(double x, double y = 0.0, double t = 0.0) const { return eval(*root_, x, y, t); }

    bool depends_on_time() const { return mentions(*root_, Kind::T); }

    /// Fully parenthesised form; parsing it reproduces the same tree.
    std::string to_string() const {
        std::string out;
        print(*root_, out);
        return out;
    }

    const Node& root() const noexcept { return *root_; }

    friend bool operator==(const Expression& a, const Expression& b) { return same(*a.root_, *b.root_); }

    static const char* name(Function f) {
        constexpr std::array names{"sin", "cos", "exp", "abs", "min", "max", "pos", "neg", "step"};
        return names[static_cast<std::size_t>(f)];
    }

    static std::size_t arity(Function f) { return (f == Function::Min || f == Function::Max) ? 2 : 1; }

private:
    static double eval(const Node& n, double x, double y, double t) {
        auto arg = [&](std::size_t i) { return eval(*n.children[i], x, y, t); };
        switch (n.kind) {
        case Kind::Number: return n.value;
        case Kind::X: return x;
        case Kind::Y: return y;
        case Kind::T: return t;
        case Kind::Pi: return std::numbers::pi;
        case Kind::Negate: return -arg(0);
        case Kind::Add: return arg(0) + arg(1);
        case Kind::Sub: return arg(0) - arg(1);
        case Kind::Mul: return arg(0) * arg(1);
        case Kind::Div: {
            const double num = arg(0);
            const double den = arg(1);
            if (den == 0.0) {
                throw ExprEvalError("division by zero");
            }
            return num / den;
        }
        case Kind::Pow: return std::pow(arg(0), arg(1));
        case Kind::Call: {
            const double a = arg(0);
            switch (n.function) {
            case Function::Sin: return std::sin(a);
            case Function::Cos: return std::cos(a);
            case Function::Exp: return std::exp(a);
            case Function::Abs: return std::abs(a);
            case Function::Min: return std::min(a, arg(1));
            case Function::Max: return std::max(a, arg(1));
            case Function::Pos: return a > 0.0 ? a : 0.0;
            case Function::Neg: return a < 0.0 ? a : 0.0;
            case Function::Step: return a >= 0.0 ? 1.0 : 0.0;
            }
        }
        }
        return 0.0;
    }

    static bool mentions(const Node& n, Kind k) {
        if (n.kind == k) {
            return true;
        }
        for (const auto& c : n.children) {
            if (mentions(*c, k)) {
                return true;
            }
        }
        return false;
    }

    static bool same(const Node& a, const Node& b) {
        if (a.kind != b.kind || a.children.size() != b.children.size()) {
            return false;
        }
        if (a.kind == Kind::Number && a.value != b.value) {
            return false;
        }
        if (a.kind == Kind::Call && a.function != b.function) {
            return false;
        }
        for (std::size_t i = 0; i < a.children.size(); ++i) {
            if (!same(*a.children[i], *b.children[i])) {
                return false;
            }
        }
        return true;
    }

    static void print(const Node& n, std::string& out) {
        switch (n.kind) {
        case Kind::Number: {
            std::array<char, 32> buf{};
            const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), n.value);
            out.append(buf.data(), res.ptr);
            return;
        }
        case Kind::X: out += 'x'; return;
        case Kind::Y: out += 'y'; return;
        case Kind::T: out += 't'; return;
        case Kind::Pi: out += "pi"; return;
        case Kind::Negate:
            out += "(-";
            print(*n.children[0], out);
            out += ')';
            return;
        case Kind::Call:
            out += name(n.function);
            out += '(';
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i > 0) out += ", ";
                print(*n.children[i], out);
            }
            out += ')';
            return;
        default: {
            constexpr std::string_view ops = "+-*/^";
            const auto op = ops[static_cast<std::size_t>(n.kind) - static_cast<std::size_t>(Kind::Add)];
            out += '(';
            print(*n.children[0], out);
            out += ' ';
            out += op;
            out += ' ';
            print(*n.children[1], out);
            out += ')';
        }
        }
    }

    std::shared_ptr<const Node> root_;
};

namespace detail {

class ExprParser {
public:
    explicit ExprParser(std::string_view src) : src_(src) {}

    Expression parse() {
        auto root = expr();
        skip_space();
        if (pos_ < src_.size()) {
            fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        }
        return Expression(std::move(root));
    }

private:
    using NodePtr = std::shared_ptr<const Expression::Node>;
    using Kind = Expression::Kind;

    [[noreturn]] void fail(const std::string& msg, std::size_t at) const { throw ExprSyntaxError(msg, at + 1); }
    [[noreturn]] void fail(const std::string& msg) const { fail(msg, pos_); }

    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r')) {
            ++pos_;
        }
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            fail(std::string("expected '") + c + "'");
        }
    }

    static NodePtr make(Kind k, std::vector<NodePtr> children = {}) {
        auto n = std::make_shared<Expression::Node>();
        n->kind = k;
        n->children = std::move(children);
        return n;
    }

    NodePtr expr() {
        auto lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make(Kind::Add, {lhs, term()});
            } else if (accept('-')) {
                lhs = make(Kind::Sub, {lhs, term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = make(Kind::Mul, {lhs, unary()});
            } else if (accept('/')) {
                lhs = make(Kind::Div, {lhs, unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary() {
        if (accept('-')) {
            return make(Kind::Negate, {unary()});
        }
        return power();
    }

    NodePtr power() {
        auto base = primary();
        if (accept('^')) {
            return make(Kind::Pow, {base, unary()});
        }
        return base;
    }

    NodePtr primary() {
        skip_space();
        if (pos_ >= src_.size()) {
            fail("unexpected end of input");
        }
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = expr();
            expect(')');
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') {
            return number();
        }
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
            return identifier();
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        const std::size_t start = pos_;
        double v = 0.0;
        const auto res = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), v);
        if (res.ec != std::errc()) {
            fail("malformed number", start);
        }
        pos_ = static_cast<std::size_t>(res.ptr - src_.data());
        auto n = std::make_shared<Expression::Node>();
        n->kind = Kind::Number;
        n->value = v;
        return n;
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               ((src_[pos_] >= 'a' && src_[pos_] <= 'z') || (src_[pos_] >= 'A' && src_[pos_] <= 'Z') ||
                (src_[pos_] >= '0' && src_[pos_] <= '9') || src_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view id = src_.substr(start, pos_ - start);
        if (id == "x") return make(Kind::X);
        if (id == "y") return make(Kind::Y);
        if (id == "t") return make(Kind::T);
        if (id == "pi") return make(Kind::Pi);

        constexpr std::array functions{Expression::Function::Sin, Expression::Function::Cos,
                                       Expression::Function::Exp, Expression::Function::Abs,
                                       Expression::Function::Min, Expression::Function::Max,
                                       Expression::Function::Pos, Expression::Function::Neg,
                                       Expression::Function::Step};
        for (const auto f : functions) {
            if (id != Expression::name(f)) {
                continue;
            }
            expect('(');
            std::vector<NodePtr> args{expr()};
            while (args.size() < Expression::arity(f)) {
                expect(',');
                args.push_back(expr());
            }
            expect(')');
            auto n = std::make_shared<Expression::Node>();
            n->kind = Kind::Call;
            n->function = f;
            n->children = std::move(args);
            return n;
        }
        fail("unknown identifier '" + std::string(id) + "'", start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline Expression parse_expression(std::string_view source) { return detail::ExprParser(source).parse(); }

} // namespace unidiff
