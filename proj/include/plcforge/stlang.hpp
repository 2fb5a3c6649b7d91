#pragma once

// Structured Text subset: parser, compiler and scan-cycle interpreter.
//
// Grammar:
//   program := 'PROGRAM' id 'VAR' decl* 'END_VAR' stmt* 'END_PROGRAM'
//   decl    := id ('AT' loc)? ':' ('BOOL'|'INT') (':=' literal)? ';'
//   stmt    := id ':=' expr ';'
//            | 'IF' expr 'THEN' stmt* ('ELSE' stmt*)? 'END_IF' ';'
//   expr    := NOT/AND/OR/XOR, comparisons, + - *, parens, TRUE/FALSE,
//              decimal INT literals; precedence OR < XOR < AND < cmp < add < mul < NOT
//
// Located variables bind to the register map: %IXa.b / %QXa.b are coil bits
// (index 8a+b, 64 per image), %IWn / %QWn are 16-bit words (16 per image).
// INT is unsigned 16 bit with wrap-around; overflow raises a flag, never aborts.

#include <array>
#include <bitset>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "plcforge/common.hpp"

namespace plcforge::stlang {

class SyntaxError : public Error {
public:
    SyntaxError(int line, int col, const std::string& msg)
        : Error("line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + msg),
          line(line),
          col(col) {}
    int line;
    int col;
};

class UndeclaredVariable : public SyntaxError {
public:
    UndeclaredVariable(int line, int col, const std::string& name)
        : SyntaxError(line, col, "undeclared variable '" + name + "'") {}
};

class BadLocation : public SyntaxError {
public:
    BadLocation(int line, int col, const std::string& text)
        : SyntaxError(line, col, "bad location '" + text + "'") {}
};

class TypeError : public SyntaxError {
public:
    TypeError(int line, int col, const std::string& msg) : SyntaxError(line, col, msg) {}
};

enum class VarType { Bool, Int };

inline const char* var_type_name(VarType t) { return t == VarType::Bool ? "BOOL" : "INT"; }

enum class Image { InputCoil, OutputCoil, InputWord, OutputWord };

struct Location {
    Image image;
    int index;  // coil bit index (8a+b) or word index

    // Printed form from the source, e.g. "%QX0.0".
    std::string text;

    bool operator==(const Location&) const = default;
};

// "%QX0.0" -> "__QX0_0", "%IW3" -> "__IW3".
inline std::string mangle(const Location& loc) {
    std::string out = "__";
    for (size_t i = 1; i < loc.text.size(); ++i) {
        char c = loc.text[i];
        out.push_back(c == '.' ? '_' : c);
    }
    return out;
}

struct Declaration {
    std::string name;
    std::optional<Location> location;
    VarType type;
    uint16_t initial = 0;  // FALSE / 0 when absent
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class Op {
    Literal,
    Var,
    Not,
    And,
    Or,
    Xor,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Add,
    Sub,
    Mul,
};

struct Expr {
    Op op = Op::Literal;
    VarType type = VarType::Int;
    uint16_t literal = 0;
    std::string var;
    ExprPtr lhs;
    ExprPtr rhs;
    int line = 0;
    int col = 0;
};

struct Statement {
    enum class Kind { Assign, If };
    Kind kind = Kind::Assign;
    std::string target;
    ExprPtr value;
    ExprPtr condition;
    std::vector<Statement> then_body;
    std::vector<Statement> else_body;
};

struct Ast {
    std::string program_name;
    std::vector<Declaration> declarations;
    std::vector<Statement> statements;
};

struct RegisterMap {
    std::bitset<64> input_coils;
    std::bitset<64> output_coils;
    std::array<uint16_t, 16> input_words{};
    std::array<uint16_t, 16> holding_words{};

    bool operator==(const RegisterMap&) const = default;
};

inline constexpr int kCoilCount = 64;
inline constexpr int kWordCount = 16;

// ---------------------------------------------------------------------------
// Lexer / parser

namespace detail {

enum class Tok {
    Ident,
    IntLit,
    Loc,
    Assign,  // :=
    Colon,
    Semi,
    LParen,
    RParen,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Star,
    End,
};

struct Token {
    Tok kind;
    std::string text;
    uint32_t value = 0;
    Location loc{};
    int line = 1;
    int col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= src_.size()) {
            t.kind = Tok::End;
            return t;
        }
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                advance();
            t.kind = Tok::Ident;
            t.text = std::string(src_.substr(start, pos_ - start));
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos_;
            uint64_t v = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                v = v * 10 + (src_[pos_] - '0');
                if (v > 0xFFFF) throw SyntaxError(t.line, t.col, "integer literal out of range");
                advance();
            }
            t.kind = Tok::IntLit;
            t.text = std::string(src_.substr(start, pos_ - start));
            t.value = static_cast<uint32_t>(v);
            return t;
        }
        if (c == '%') {
            t.kind = Tok::Loc;
            t.loc = lex_location(t.line, t.col);
            t.text = t.loc.text;
            return t;
        }
        advance();
        switch (c) {
            case ';': t.kind = Tok::Semi; return t;
            case '(': t.kind = Tok::LParen; return t;
            case ')': t.kind = Tok::RParen; return t;
            case '+': t.kind = Tok::Plus; return t;
            case '-': t.kind = Tok::Minus; return t;
            case '*': t.kind = Tok::Star; return t;
            case '=': t.kind = Tok::Eq; return t;
            case ':':
                if (peek() == '=') {
                    advance();
                    t.kind = Tok::Assign;
                } else {
                    t.kind = Tok::Colon;
                }
                return t;
            case '<':
                if (peek() == '>') {
                    advance();
                    t.kind = Tok::Ne;
                } else if (peek() == '=') {
                    advance();
                    t.kind = Tok::Le;
                } else {
                    t.kind = Tok::Lt;
                }
                return t;
            case '>':
                if (peek() == '=') {
                    advance();
                    t.kind = Tok::Ge;
                } else {
                    t.kind = Tok::Gt;
                }
                return t;
            default:
                throw SyntaxError(t.line, t.col, std::string("unexpected character '") + c + "'");
        }
    }

private:
    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

    void advance() {
        if (pos_ < src_.size()) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
    }

    Location lex_location(int line, int col) {
        std::string text = "%";
        advance();  // consume '%'
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                      src_[pos_] == '.')) {
            text.push_back(src_[pos_]);
            advance();
        }
        auto bad = [&]() -> Location { throw BadLocation(line, col, text); };
        if (text.size() < 4) return bad();
        std::string prefix = text.substr(1, 2);
        std::string rest = text.substr(3);
        auto parse_num = [&](const std::string& s, int& out) {
            if (s.empty()) return false;
            long v = 0;
            for (char c : s) {
                if (!std::isdigit(static_cast<unsigned char>(c))) return false;
                v = v * 10 + (c - '0');
                if (v > 9999) return false;
            }
            out = static_cast<int>(v);
            return true;
        };
        Location loc;
        loc.text = text;
        if (prefix == "IX" || prefix == "QX") {
            size_t dot = rest.find('.');
            if (dot == std::string::npos) return bad();
            int a = 0, b = 0;
            if (!parse_num(rest.substr(0, dot), a) || !parse_num(rest.substr(dot + 1), b)) return bad();
            if (b > 7) return bad();
            int index = 8 * a + b;
            if (index >= kCoilCount) return bad();
            loc.image = prefix == "IX" ? Image::InputCoil : Image::OutputCoil;
            loc.index = index;
            return loc;
        }
        if (prefix == "IW" || prefix == "QW") {
            int n = 0;
            if (!parse_num(rest, n)) return bad();
            if (n >= kWordCount) return bad();
            loc.image = prefix == "IW" ? Image::InputWord : Image::OutputWord;
            loc.index = n;
            return loc;
        }
        return bad();
    }

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) { bump(); }

    Ast parse_program() {
        Ast ast;
        expect_keyword("PROGRAM");
        ast.program_name = expect_ident("program name");
        expect_keyword("VAR");
        while (!at_keyword("END_VAR")) ast.declarations.push_back(parse_declaration());
        expect_keyword("END_VAR");
        for (const auto& d : ast.declarations) {
            if (types_.count(d.name))
                throw SyntaxError(cur_.line, cur_.col, "duplicate declaration '" + d.name + "'");
            types_[d.name] = d.type;
        }
        while (!at_keyword("END_PROGRAM")) ast.statements.push_back(parse_statement());
        expect_keyword("END_PROGRAM");
        if (cur_.kind != Tok::End) throw SyntaxError(cur_.line, cur_.col, "trailing input after END_PROGRAM");
        return ast;
    }

private:
    void bump() { cur_ = lex_.next(); }

    bool at_keyword(std::string_view kw) const { return cur_.kind == Tok::Ident && cur_.text == kw; }

    void expect_keyword(std::string_view kw) {
        if (!at_keyword(kw))
            throw SyntaxError(cur_.line, cur_.col,
                              "expected " + std::string(kw) + ", got '" + cur_.text + "'");
        bump();
    }

    std::string expect_ident(const std::string& what) {
        if (cur_.kind != Tok::Ident)
            throw SyntaxError(cur_.line, cur_.col, "expected " + what);
        std::string name = cur_.text;
        bump();
        return name;
    }

    void expect(Tok kind, const char* what) {
        if (cur_.kind != kind) throw SyntaxError(cur_.line, cur_.col, std::string("expected ") + what);
        bump();
    }

    Declaration parse_declaration() {
        Declaration d;
        d.name = expect_ident("variable name");
        if (is_reserved(d.name))
            throw SyntaxError(cur_.line, cur_.col, "reserved word used as variable name");
        if (at_keyword("AT")) {
            bump();
            if (cur_.kind != Tok::Loc) throw SyntaxError(cur_.line, cur_.col, "expected %-location");
            d.location = cur_.loc;
            bump();
        }
        expect(Tok::Colon, "':'");
        if (at_keyword("BOOL")) {
            d.type = VarType::Bool;
        } else if (at_keyword("INT")) {
            d.type = VarType::Int;
        } else {
            throw SyntaxError(cur_.line, cur_.col, "expected BOOL or INT");
        }
        bump();
        if (d.location) {
            bool word = d.location->image == Image::InputWord || d.location->image == Image::OutputWord;
            if (word != (d.type == VarType::Int))
                throw TypeError(cur_.line, cur_.col, "location width does not match declared type");
        }
        if (cur_.kind == Tok::Assign) {
            bump();
            if (at_keyword("TRUE") || at_keyword("FALSE")) {
                if (d.type != VarType::Bool)
                    throw TypeError(cur_.line, cur_.col, "boolean initial on INT variable");
                d.initial = at_keyword("TRUE") ? 1 : 0;
                bump();
            } else if (cur_.kind == Tok::IntLit) {
                if (d.type != VarType::Int)
                    throw TypeError(cur_.line, cur_.col, "integer initial on BOOL variable");
                d.initial = static_cast<uint16_t>(cur_.value);
                bump();
            } else {
                throw SyntaxError(cur_.line, cur_.col, "expected literal initial value");
            }
        }
        expect(Tok::Semi, "';'");
        return d;
    }

    Statement parse_statement() {
        if (at_keyword("IF")) {
            Statement s;
            s.kind = Statement::Kind::If;
            int line = cur_.line, col = cur_.col;
            bump();
            s.condition = parse_expr();
            if (s.condition->type != VarType::Bool)
                throw TypeError(line, col, "IF condition must be BOOL");
            expect_keyword("THEN");
            while (!at_keyword("ELSE") && !at_keyword("END_IF")) s.then_body.push_back(parse_statement());
            if (at_keyword("ELSE")) {
                bump();
                while (!at_keyword("END_IF")) s.else_body.push_back(parse_statement());
            }
            expect_keyword("END_IF");
            expect(Tok::Semi, "';'");
            return s;
        }
        Statement s;
        s.kind = Statement::Kind::Assign;
        int line = cur_.line, col = cur_.col;
        s.target = expect_ident("assignment target");
        auto it = types_.find(s.target);
        if (it == types_.end()) throw UndeclaredVariable(line, col, s.target);
        expect(Tok::Assign, "':='");
        s.value = parse_expr();
        if (s.value->type != it->second)
            throw TypeError(line, col, "assignment type mismatch on '" + s.target + "'");
        expect(Tok::Semi, "';'");
        return s;
    }

    ExprPtr parse_expr() { return parse_or(); }

    ExprPtr make_binary(Op op, ExprPtr lhs, ExprPtr rhs, int line, int col) {
        auto e = std::make_unique<Expr>();
        e->op = op;
        e->line = line;
        e->col = col;
        bool logic = op == Op::And || op == Op::Or || op == Op::Xor;
        bool arith = op == Op::Add || op == Op::Sub || op == Op::Mul;
        if (logic) {
            if (lhs->type != VarType::Bool || rhs->type != VarType::Bool)
                throw TypeError(line, col, "logic operator needs BOOL operands");
            e->type = VarType::Bool;
        } else if (arith) {
            if (lhs->type != VarType::Int || rhs->type != VarType::Int)
                throw TypeError(line, col, "arithmetic needs INT operands");
            e->type = VarType::Int;
        } else {
            // Comparison: BOOL coerces to INT as 0/1.
            e->type = VarType::Bool;
        }
        e->lhs = std::move(lhs);
        e->rhs = std::move(rhs);
        return e;
    }

    ExprPtr parse_or() {
        auto lhs = parse_xor();
        while (at_keyword("OR")) {
            int line = cur_.line, col = cur_.col;
            bump();
            lhs = make_binary(Op::Or, std::move(lhs), parse_xor(), line, col);
        }
        return lhs;
    }

    ExprPtr parse_xor() {
        auto lhs = parse_and();
        while (at_keyword("XOR")) {
            int line = cur_.line, col = cur_.col;
            bump();
            lhs = make_binary(Op::Xor, std::move(lhs), parse_and(), line, col);
        }
        return lhs;
    }

    ExprPtr parse_and() {
        auto lhs = parse_cmp();
        while (at_keyword("AND")) {
            int line = cur_.line, col = cur_.col;
            bump();
            lhs = make_binary(Op::And, std::move(lhs), parse_cmp(), line, col);
        }
        return lhs;
    }

    ExprPtr parse_cmp() {
        auto lhs = parse_add();
        for (;;) {
            Op op;
            switch (cur_.kind) {
                case Tok::Eq: op = Op::Eq; break;
                case Tok::Ne: op = Op::Ne; break;
                case Tok::Lt: op = Op::Lt; break;
                case Tok::Gt: op = Op::Gt; break;
                case Tok::Le: op = Op::Le; break;
                case Tok::Ge: op = Op::Ge; break;
                default: return lhs;
            }
            int line = cur_.line, col = cur_.col;
            bump();
            lhs = make_binary(op, std::move(lhs), parse_add(), line, col);
        }
    }

    ExprPtr parse_add() {
        auto lhs = parse_mul();
        while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
            Op op = cur_.kind == Tok::Plus ? Op::Add : Op::Sub;
            int line = cur_.line, col = cur_.col;
            bump();
            lhs = make_binary(op, std::move(lhs), parse_mul(), line, col);
        }
        return lhs;
    }

    ExprPtr parse_mul() {
        auto lhs = parse_unary();
        while (cur_.kind == Tok::Star) {
            int line = cur_.line, col = cur_.col;
            bump();
            lhs = make_binary(Op::Mul, std::move(lhs), parse_unary(), line, col);
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (at_keyword("NOT")) {
            int line = cur_.line, col = cur_.col;
            bump();
            auto e = std::make_unique<Expr>();
            e->op = Op::Not;
            e->line = line;
            e->col = col;
            e->lhs = parse_unary();
            if (e->lhs->type != VarType::Bool) throw TypeError(line, col, "NOT needs a BOOL operand");
            e->type = VarType::Bool;
            return e;
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        auto e = std::make_unique<Expr>();
        e->line = cur_.line;
        e->col = cur_.col;
        if (cur_.kind == Tok::LParen) {
            bump();
            auto inner = parse_expr();
            expect(Tok::RParen, "')'");
            return inner;
        }
        if (cur_.kind == Tok::IntLit) {
            e->op = Op::Literal;
            e->type = VarType::Int;
            e->literal = static_cast<uint16_t>(cur_.value);
            bump();
            return e;
        }
        if (at_keyword("TRUE") || at_keyword("FALSE")) {
            e->op = Op::Literal;
            e->type = VarType::Bool;
            e->literal = at_keyword("TRUE") ? 1 : 0;
            bump();
            return e;
        }
        if (cur_.kind == Tok::Ident) {
            if (is_reserved(cur_.text))
                throw SyntaxError(cur_.line, cur_.col, "unexpected keyword '" + cur_.text + "'");
            auto it = types_.find(cur_.text);
            if (it == types_.end()) throw UndeclaredVariable(cur_.line, cur_.col, cur_.text);
            e->op = Op::Var;
            e->var = cur_.text;
            e->type = it->second;
            bump();
            return e;
        }
        throw SyntaxError(cur_.line, cur_.col, "expected expression");
    }

    static bool is_reserved(const std::string& s) {
        static const char* kws[] = {"PROGRAM", "END_PROGRAM", "VAR", "END_VAR", "AT",
                                    "BOOL",    "INT",         "IF",  "THEN",    "ELSE",
                                    "END_IF",  "NOT",         "AND", "OR",      "XOR",
                                    "TRUE",    "FALSE"};
        for (const char* k : kws)
            if (s == k) return true;
        return false;
    }

    Lexer lex_;
    Token cur_;
    std::unordered_map<std::string, VarType> types_;
};

}  // namespace detail

inline Ast parse(std::string_view source) {
    detail::Parser p(source);
    return p.parse_program();
}

// ---------------------------------------------------------------------------
// Compilation

struct CompiledProgram {
    std::shared_ptr<const Ast> ast;

    // Located declarations in source order: (mangled name, type).
    std::vector<std::pair<std::string, VarType>> located;
};

inline std::pair<CompiledProgram, std::vector<std::string>> compile(Ast ast) {
    CompiledProgram prog;
    std::vector<std::string> log;
    for (const auto& d : ast.declarations) {
        if (!d.location) continue;
        std::string mangled = mangle(*d.location);
        prog.located.emplace_back(mangled, d.type);
        log.push_back("varName: " + mangled + "\tvarType: " + var_type_name(d.type));
    }
    log.push_back("Compiling main program...");
    log.push_back("Compilation finished successfully!");
    prog.ast = std::make_shared<const Ast>(std::move(ast));
    return {std::move(prog), std::move(log)};
}

inline std::pair<CompiledProgram, std::vector<std::string>> compile_source(std::string_view src) {
    return compile(parse(src));
}

inline std::vector<std::pair<std::string, VarType>> variables(const CompiledProgram& prog) {
    return prog.located;
}

// ---------------------------------------------------------------------------
// Execution

struct ScanResult {
    RegisterMap regs;
    bool wrapped = false;
};

namespace detail {

struct EvalEnv {
    std::unordered_map<std::string, uint16_t> values;
    bool wrapped = false;
};

inline uint16_t eval_expr(const Expr& e, EvalEnv& env) {
    switch (e.op) {
        case Op::Literal: return e.literal;
        case Op::Var: return env.values.at(e.var);
        case Op::Not: return eval_expr(*e.lhs, env) ? 0 : 1;
        default: break;
    }
    uint16_t a = eval_expr(*e.lhs, env);
    uint16_t b = eval_expr(*e.rhs, env);
    switch (e.op) {
        case Op::And: return (a && b) ? 1 : 0;
        case Op::Or: return (a || b) ? 1 : 0;
        case Op::Xor: return (!a != !b) ? 1 : 0;
        case Op::Eq: return a == b ? 1 : 0;
        case Op::Ne: return a != b ? 1 : 0;
        case Op::Lt: return a < b ? 1 : 0;
        case Op::Gt: return a > b ? 1 : 0;
        case Op::Le: return a <= b ? 1 : 0;
        case Op::Ge: return a >= b ? 1 : 0;
        case Op::Add: {
            int64_t r = int64_t(a) + b;
            if (r > 0xFFFF) env.wrapped = true;
            return static_cast<uint16_t>(r);
        }
        case Op::Sub: {
            int64_t r = int64_t(a) - b;
            if (r < 0) env.wrapped = true;
            return static_cast<uint16_t>(r);
        }
        case Op::Mul: {
            int64_t r = int64_t(a) * b;
            if (r > 0xFFFF) env.wrapped = true;
            return static_cast<uint16_t>(r);
        }
        default: throw Error("unreachable expression op");
    }
}

inline void exec_statements(const std::vector<Statement>& stmts, EvalEnv& env) {
    for (const auto& s : stmts) {
        if (s.kind == Statement::Kind::Assign) {
            env.values[s.target] = eval_expr(*s.value, env);
        } else {
            if (eval_expr(*s.condition, env))
                exec_statements(s.then_body, env);
            else
                exec_statements(s.else_body, env);
        }
    }
}

}  // namespace detail

// One scan: read input images, run statements in order, write output images.
// Pure with respect to its arguments; %I images are never modified.
inline ScanResult scan_cycle(const CompiledProgram& prog, const RegisterMap& regs) {
    detail::EvalEnv env;
    for (const auto& d : prog.ast->declarations) {
        uint16_t v = d.initial;
        if (d.location) {
            switch (d.location->image) {
                case Image::InputCoil: v = regs.input_coils[d.location->index] ? 1 : 0; break;
                case Image::OutputCoil: v = regs.output_coils[d.location->index] ? 1 : 0; break;
                case Image::InputWord: v = regs.input_words[d.location->index]; break;
                case Image::OutputWord: v = regs.holding_words[d.location->index]; break;
            }
        }
        env.values[d.name] = v;
    }
    detail::exec_statements(prog.ast->statements, env);
    ScanResult out{regs, env.wrapped};
    for (const auto& d : prog.ast->declarations) {
        if (!d.location) continue;
        uint16_t v = env.values[d.name];
        switch (d.location->image) {
            case Image::OutputCoil: out.regs.output_coils[d.location->index] = v != 0; break;
            case Image::OutputWord: out.regs.holding_words[d.location->index] = v; break;
            default: break;  // input images are read-only
        }
    }
    return out;
}

}  // namespace plcforge::stlang
