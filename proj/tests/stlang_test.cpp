#include "plcforge/stlang.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace plcforge;
using namespace plcforge::stlang;

namespace {

constexpr const char* kMinimal =
    "PROGRAM p VAR b AT %IX0.0 : BOOL; q AT %QX0.0 : BOOL; END_VAR q := NOT b; END_PROGRAM";

RegisterMap with_inputs(uint8_t coil_bits, std::array<uint16_t, 4> words = {}) {
    RegisterMap regs;
    for (int i = 0; i < 8; ++i) regs.input_coils[i] = (coil_bits >> i) & 1;
    for (size_t i = 0; i < words.size(); ++i) regs.input_words[i] = words[i];
    return regs;
}

}  // namespace

TEST(Parse, MinimalProgram) {
    Ast ast = parse(kMinimal);
    EXPECT_EQ(ast.program_name, "p");
    EXPECT_EQ(ast.declarations.size(), 2u);
    EXPECT_EQ(ast.statements.size(), 1u);
    EXPECT_EQ(ast.declarations[0].location->text, "%IX0.0");
    EXPECT_EQ(ast.declarations[1].location->image, Image::OutputCoil);
}

TEST(Parse, BadLocationPrefix) {
    std::string src = kMinimal;
    replace_first(src, "%IX0.0", "%ZX0.0");
    EXPECT_THROW(parse(src), BadLocation);
}

TEST(Parse, BadLocationRange) {
    EXPECT_THROW(parse("PROGRAM p VAR q AT %QX0.8 : BOOL; END_VAR END_PROGRAM"), BadLocation);
    EXPECT_THROW(parse("PROGRAM p VAR q AT %QX8.0 : BOOL; END_VAR END_PROGRAM"), BadLocation);
    EXPECT_THROW(parse("PROGRAM p VAR w AT %QW16 : INT; END_VAR END_PROGRAM"), BadLocation);
    EXPECT_NO_THROW(parse("PROGRAM p VAR q AT %QX7.7 : BOOL; END_VAR END_PROGRAM"));
    EXPECT_NO_THROW(parse("PROGRAM p VAR w AT %QW15 : INT; END_VAR END_PROGRAM"));
}

TEST(Parse, UndeclaredVariable) {
    EXPECT_THROW(parse("PROGRAM p VAR q AT %QX0.0 : BOOL; END_VAR q := r; END_PROGRAM"),
                 UndeclaredVariable);
}

TEST(Parse, SyntaxErrorCarriesPosition) {
    try {
        parse("PROGRAM p VAR\nq AT %QX0.0 : BOOL\nEND_VAR END_PROGRAM");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_GE(e.line, 2);
    }
}

TEST(Parse, TypeRules) {
    // Mixed arithmetic is a type error; BOOL only coerces inside comparisons.
    EXPECT_THROW(parse("PROGRAM p VAR b : BOOL; w : INT; END_VAR w := w + b; END_PROGRAM"),
                 TypeError);
    EXPECT_THROW(parse("PROGRAM p VAR b : BOOL; w : INT; END_VAR b := w; END_PROGRAM"), TypeError);
    EXPECT_NO_THROW(
        parse("PROGRAM p VAR b : BOOL; w : INT; END_VAR b := w > 2; b := b = (w < 1); END_PROGRAM"));
    EXPECT_THROW(parse("PROGRAM p VAR w AT %QW0 : BOOL; END_VAR END_PROGRAM"), TypeError);
}

TEST(Parse, IfElseAndInitials) {
    Ast ast = parse(
        "PROGRAM p VAR a : BOOL := TRUE; n : INT := 7; q AT %QX0.0 : BOOL; END_VAR "
        "IF a THEN q := TRUE; ELSE q := FALSE; END_IF; END_PROGRAM");
    EXPECT_EQ(ast.declarations[0].initial, 1);
    EXPECT_EQ(ast.declarations[1].initial, 7);
    EXPECT_EQ(ast.statements[0].kind, Statement::Kind::If);
}

TEST(Compile, LogLines) {
    auto [prog, log] = compile_source(kMinimal);
    ASSERT_EQ(log.size(), 4u);
    EXPECT_EQ(log[0], "varName: __IX0_0\tvarType: BOOL");
    EXPECT_EQ(log[1], "varName: __QX0_0\tvarType: BOOL");
    EXPECT_EQ(log[2], "Compiling main program...");
    EXPECT_EQ(log.back(), "Compilation finished successfully!");
}

TEST(Compile, NoLocatedVarsLogsOnlyTrailer) {
    auto [prog, log] = compile_source("PROGRAM p VAR x : BOOL; END_VAR x := TRUE; END_PROGRAM");
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(log[0], "Compiling main program...");
    EXPECT_EQ(log[1], "Compilation finished successfully!");
}

TEST(Compile, VariablesListsLocatedInSourceOrder) {
    auto [prog, log] = compile_source(kMinimal);
    auto vars = variables(prog);
    ASSERT_EQ(vars.size(), 2u);
    EXPECT_EQ(vars[0], (std::pair<std::string, VarType>{"__IX0_0", VarType::Bool}));
    EXPECT_EQ(vars[1], (std::pair<std::string, VarType>{"__QX0_0", VarType::Bool}));

    auto [prog2, log2] =
        compile_source("PROGRAM p VAR END_VAR END_PROGRAM");
    EXPECT_TRUE(variables(prog2).empty());

    auto [prog3, log3] = compile_source(
        "PROGRAM p VAR w AT %QW3 : INT; b AT %IX1.2 : BOOL; v AT %IW0 : INT; END_VAR "
        "END_PROGRAM");
    auto vars3 = variables(prog3);
    ASSERT_EQ(vars3.size(), 3u);
    EXPECT_EQ(vars3[0].first, "__QW3");
    EXPECT_EQ(vars3[1].first, "__IX1_2");
    EXPECT_EQ(vars3[2].first, "__IW0");
}

TEST(Scan, Negation) {
    auto [prog, log] = compile_source(kMinimal);
    auto out = scan_cycle(prog, with_inputs(0b1));
    EXPECT_FALSE(out.regs.output_coils[0]);
    out = scan_cycle(prog, with_inputs(0b0));
    EXPECT_TRUE(out.regs.output_coils[0]);
}

TEST(Scan, AndTruthTableMatchesOracle) {
    auto [prog, log] = compile_source(
        "PROGRAM p VAR a AT %IX0.0 : BOOL; b AT %IX0.1 : BOOL; q AT %QX0.0 : BOOL; END_VAR "
        "q := a AND b; END_PROGRAM");
    auto oracle = [](bool a, bool b) { return a && b; };
    for (int v = 0; v < 4; ++v) {
        bool a = v & 1, b = v & 2;
        auto out = scan_cycle(prog, with_inputs(static_cast<uint8_t>(v)));
        EXPECT_EQ(out.regs.output_coils[0], oracle(a, b)) << "vector " << v;
    }
}

TEST(Scan, WordWrapAround) {
    auto [prog, log] = compile_source(
        "PROGRAM p VAR iw AT %IW0 : INT; w AT %QW0 : INT; END_VAR w := iw + 1; END_PROGRAM");
    auto out = scan_cycle(prog, with_inputs(0, {65535, 0, 0, 0}));
    EXPECT_EQ(out.regs.holding_words[0], (65535 + 1) % 65536);
    EXPECT_TRUE(out.wrapped);
    out = scan_cycle(prog, with_inputs(0, {7, 0, 0, 0}));
    EXPECT_EQ(out.regs.holding_words[0], 8);
    EXPECT_FALSE(out.wrapped);
}

TEST(Scan, SubtractionWraps) {
    auto [prog, log] = compile_source(
        "PROGRAM p VAR iw AT %IW0 : INT; w AT %QW0 : INT; END_VAR w := iw - 1; END_PROGRAM");
    auto out = scan_cycle(prog, with_inputs(0, {0, 0, 0, 0}));
    EXPECT_EQ(out.regs.holding_words[0], 65535);
    EXPECT_TRUE(out.wrapped);
}

TEST(Scan, Deterministic) {
    auto [prog, log] = compile_source(kMinimal);
    RegisterMap regs = with_inputs(0b1);
    auto a = scan_cycle(prog, regs);
    auto b = scan_cycle(prog, regs);
    EXPECT_EQ(a.regs, b.regs);
    EXPECT_EQ(a.wrapped, b.wrapped);
}

TEST(Scan, InputImagesPreserved) {
    auto [prog, log] = compile_source(
        "PROGRAM p VAR a AT %IX0.0 : BOOL; w AT %IW2 : INT; q AT %QX0.3 : BOOL; END_VAR "
        "q := a; END_PROGRAM");
    RegisterMap regs = with_inputs(0b101, {11, 22, 33, 44});
    regs.holding_words[5] = 999;
    auto out = scan_cycle(prog, regs);
    EXPECT_EQ(out.regs.input_coils, regs.input_coils);
    EXPECT_EQ(out.regs.input_words, regs.input_words);
    EXPECT_EQ(out.regs.holding_words[5], 999);  // unassigned holding word untouched
}

TEST(Scan, AssignmentToInputLocatedStaysLocal) {
    auto [prog, log] = compile_source(
        "PROGRAM p VAR a AT %IX0.0 : BOOL; q AT %QX0.0 : BOOL; END_VAR "
        "a := TRUE; q := a; END_PROGRAM");
    auto out = scan_cycle(prog, with_inputs(0));
    EXPECT_TRUE(out.regs.output_coils[0]);  // local value used downstream
    EXPECT_FALSE(out.regs.input_coils[0]);  // image untouched
}

// Mutating a single operator must change at least one output vector; this
// is what makes an injection observable at the plant.
TEST(Scan, OperatorSwapSensitivity) {
    const std::string base =
        "PROGRAM p VAR a AT %IX0.0 : BOOL; b AT %IX0.1 : BOOL; q AT %QX0.0 : BOOL; END_VAR "
        "q := a AND b; END_PROGRAM";
    const std::string cmp_base =
        "PROGRAM p VAR iw AT %IW0 : INT; q AT %QX0.0 : BOOL; END_VAR q := iw < 10; END_PROGRAM";

    auto table = [](const std::string& src) {
        auto [prog, log] = compile_source(src);
        std::string t;
        for (int v = 0; v < 16; ++v) {
            RegisterMap regs = with_inputs(static_cast<uint8_t>(v), {static_cast<uint16_t>(v), 0, 0, 0});
            t += scan_cycle(prog, regs).regs.output_coils[0] ? '1' : '0';
        }
        return t;
    };

    std::string swapped = base;
    ASSERT_TRUE(replace_first(swapped, "AND", "OR"));
    EXPECT_NE(table(base), table(swapped));

    std::string unnegated =
        "PROGRAM p VAR a AT %IX0.0 : BOOL; b AT %IX0.1 : BOOL; q AT %QX0.0 : BOOL; END_VAR "
        "q := NOT a; END_PROGRAM";
    std::string identity = unnegated;
    ASSERT_TRUE(replace_first(identity, "NOT a", "a"));
    EXPECT_NE(table(unnegated), table(identity));

    std::string cmp_swapped = cmp_base;
    ASSERT_TRUE(replace_first(cmp_swapped, "<", ">"));
    EXPECT_NE(table(cmp_base), table(cmp_swapped));
}

// ---------------------------------------------------------------------------
// Property: random boolean expressions evaluated via parse/compile/scan must
// agree with direct evaluation of the generated tree. The tree evaluator
// below never touches stlang internals.

namespace {

struct GenExpr {
    int op;  // 0..3: var, NOT, AND, OR, XOR at 4
    int var = 0;
    std::unique_ptr<GenExpr> l, r;
};

std::unique_ptr<GenExpr> gen_expr(std::mt19937& rng, int depth) {
    auto e = std::make_unique<GenExpr>();
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 4);
    e->op = pick(rng);
    if (e->op == 0) {
        e->var = std::uniform_int_distribution<int>(0, 3)(rng);
        return e;
    }
    e->l = gen_expr(rng, depth - 1);
    if (e->op >= 2) e->r = gen_expr(rng, depth - 1);
    return e;
}

std::string render(const GenExpr& e) {
    static const char* names[] = {"a", "b", "c", "d"};
    switch (e.op) {
        case 0: return names[e.var];
        case 1: return "(NOT " + render(*e.l) + ")";
        case 2: return "(" + render(*e.l) + " AND " + render(*e.r) + ")";
        case 3: return "(" + render(*e.l) + " OR " + render(*e.r) + ")";
        default: return "(" + render(*e.l) + " XOR " + render(*e.r) + ")";
    }
}

bool eval_gen(const GenExpr& e, int bits) {
    switch (e.op) {
        case 0: return (bits >> e.var) & 1;
        case 1: return !eval_gen(*e.l, bits);
        case 2: return eval_gen(*e.l, bits) && eval_gen(*e.r, bits);
        case 3: return eval_gen(*e.l, bits) || eval_gen(*e.r, bits);
        default: return eval_gen(*e.l, bits) != eval_gen(*e.r, bits);
    }
}

}  // namespace

TEST(Property, RandomBooleanProgramsMatchBruteForce) {
    std::mt19937 rng(20230705);
    for (int iter = 0; iter < 60; ++iter) {
        auto tree = gen_expr(rng, 4);
        std::string src =
            "PROGRAM gen VAR a AT %IX0.0 : BOOL; b AT %IX0.1 : BOOL; c AT %IX0.2 : BOOL; "
            "d AT %IX0.3 : BOOL; q AT %QX0.0 : BOOL; END_VAR q := " +
            render(*tree) + "; END_PROGRAM";
        auto [prog, log] = compile_source(src);
        for (int bits = 0; bits < 16; ++bits) {
            auto out = scan_cycle(prog, with_inputs(static_cast<uint8_t>(bits)));
            ASSERT_EQ(out.regs.output_coils[0], eval_gen(*tree, bits))
                << "iter " << iter << " bits " << bits << "\n" << src;
        }
    }
}

namespace {

struct GenIntExpr {
    int op;  // 0 literal, 1 var, 2 add, 3 sub, 4 mul
    uint16_t literal = 0;
    int var = 0;
    std::unique_ptr<GenIntExpr> l, r;
};

std::unique_ptr<GenIntExpr> gen_int_expr(std::mt19937& rng, int depth) {
    auto e = std::make_unique<GenIntExpr>();
    e->op = std::uniform_int_distribution<int>(0, depth <= 0 ? 1 : 4)(rng);
    if (e->op == 0) {
        e->literal = static_cast<uint16_t>(rng());
        return e;
    }
    if (e->op == 1) {
        e->var = std::uniform_int_distribution<int>(0, 3)(rng);
        return e;
    }
    e->l = gen_int_expr(rng, depth - 1);
    e->r = gen_int_expr(rng, depth - 1);
    return e;
}

std::string render_int(const GenIntExpr& e) {
    static const char* names[] = {"w0", "w1", "w2", "w3"};
    switch (e.op) {
        case 0: return std::to_string(e.literal);
        case 1: return names[e.var];
        case 2: return "(" + render_int(*e.l) + " + " + render_int(*e.r) + ")";
        case 3: return "(" + render_int(*e.l) + " - " + render_int(*e.r) + ")";
        default: return "(" + render_int(*e.l) + " * " + render_int(*e.r) + ")";
    }
}

uint16_t eval_int(const GenIntExpr& e, const std::array<uint16_t, 4>& w, bool& wrapped) {
    switch (e.op) {
        case 0: return e.literal;
        case 1: return w[e.var];
        default: break;
    }
    int64_t a = eval_int(*e.l, w, wrapped);
    int64_t b = eval_int(*e.r, w, wrapped);
    int64_t r = e.op == 2 ? a + b : e.op == 3 ? a - b : a * b;
    if (r < 0 || r > 0xFFFF) wrapped = true;
    return static_cast<uint16_t>(r & 0xFFFF);
}

}  // namespace

TEST(Property, RandomWordArithmeticWrapsLikeModularOracle) {
    std::mt19937 rng(898031);
    for (int iter = 0; iter < 60; ++iter) {
        auto tree = gen_int_expr(rng, 3);
        std::string src =
            "PROGRAM gen VAR w0 AT %IW0 : INT; w1 AT %IW1 : INT; w2 AT %IW2 : INT; "
            "w3 AT %IW3 : INT; o AT %QW0 : INT; END_VAR o := " +
            render_int(*tree) + "; END_PROGRAM";
        auto [prog, log] = compile_source(src);
        for (int round = 0; round < 8; ++round) {
            std::array<uint16_t, 4> w{static_cast<uint16_t>(rng()), static_cast<uint16_t>(rng()),
                                      static_cast<uint16_t>(rng()), static_cast<uint16_t>(rng())};
            bool expect_wrap = false;
            uint16_t expect = eval_int(*tree, w, expect_wrap);
            auto out = scan_cycle(prog, with_inputs(0, w));
            ASSERT_EQ(out.regs.holding_words[0], expect) << src;
            ASSERT_EQ(out.wrapped, expect_wrap) << src;
        }
    }
}
