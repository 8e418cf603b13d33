#ifndef HIRC_PARSER_HPP
#define HIRC_PARSER_HPP

#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "hirc/ir.hpp"
#include "hirc/validate.hpp"

namespace hirc {

//===----------------------------------------------------------------------===//
// Lexer
//===----------------------------------------------------------------------===//

enum class Tok {
  Eof,
  Word,      // keywords, type names
  Percent,   // %name
  AtName,    // @name
  Int,       // decimal literal, optionally negative
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Less,
  Greater,
  Comma,
  Colon,
  Equal,
  Arrow,
  Unknown,
};

struct Token {
  Tok kind = Tok::Eof;
  std::string text;
  int64_t value = 0;
  SourceLoc loc;
};

class Lexer {
public:
  Lexer(std::string source, std::string file)
      : src(std::move(source)), file(std::move(file)) {}

  const std::string &fileName() const { return file; }

  Token next() {
    skipTrivia();
    Token t;
    t.loc = {line, col};
    if (pos >= src.size()) {
      t.kind = Tok::Eof;
      return t;
    }
    char c = src[pos];
    if (c == '%' || c == '@') {
      advance();
      size_t start = pos;
      while (pos < src.size() && (std::isalnum((unsigned char)src[pos]) ||
                                  src[pos] == '_' || src[pos] == '.'))
        advance();
      t.kind = c == '%' ? Tok::Percent : Tok::AtName;
      t.text = src.substr(start, pos - start);
      if (t.text.empty())
        t.kind = Tok::Unknown;
      return t;
    }
    if (std::isdigit((unsigned char)c) ||
        (c == '-' && pos + 1 < src.size() &&
         std::isdigit((unsigned char)src[pos + 1]))) {
      size_t start = pos;
      if (c == '-')
        advance();
      while (pos < src.size() && std::isdigit((unsigned char)src[pos]))
        advance();
      t.kind = Tok::Int;
      t.text = src.substr(start, pos - start);
      t.value = std::stoll(t.text);
      return t;
    }
    if (std::isalpha((unsigned char)c) || c == '_' || c == '!') {
      size_t start = pos;
      while (pos < src.size() && (std::isalnum((unsigned char)src[pos]) ||
                                  src[pos] == '_' || src[pos] == '!'))
        advance();
      t.kind = Tok::Word;
      t.text = src.substr(start, pos - start);
      return t;
    }
    if (c == '-' && pos + 1 < src.size() && src[pos + 1] == '>') {
      advance();
      advance();
      t.kind = Tok::Arrow;
      t.text = "->";
      return t;
    }
    advance();
    t.text = std::string(1, c);
    switch (c) {
    case '(': t.kind = Tok::LParen; break;
    case ')': t.kind = Tok::RParen; break;
    case '{': t.kind = Tok::LBrace; break;
    case '}': t.kind = Tok::RBrace; break;
    case '[': t.kind = Tok::LBracket; break;
    case ']': t.kind = Tok::RBracket; break;
    case '<': t.kind = Tok::Less; break;
    case '>': t.kind = Tok::Greater; break;
    case ',': t.kind = Tok::Comma; break;
    case ':': t.kind = Tok::Colon; break;
    case '=': t.kind = Tok::Equal; break;
    default: t.kind = Tok::Unknown; break;
    }
    return t;
  }

private:
  void advance() {
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skipTrivia() {
    while (pos < src.size()) {
      char c = src[pos];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && pos + 1 < src.size() && src[pos + 1] == '/') {
        while (pos < src.size() && src[pos] != '\n')
          advance();
      } else {
        break;
      }
    }
  }

  std::string src;
  std::string file;
  size_t pos = 0;
  int line = 1;
  int col = 1;
};

//===----------------------------------------------------------------------===//
// Parser
//===----------------------------------------------------------------------===//

struct ParseResult {
  Module module;
  std::vector<Diagnostic> diags;
  bool ok() const { return !hasErrors(diags); }
};

class Parser {
public:
  Parser(std::string source, std::string file)
      : lex(std::move(source), std::move(file)) {
    tok = lex.next();
  }

  ParseResult parseModule() {
    ParseResult res;
    while (tok.kind != Tok::Eof) {
      if (isWord("def") || isWord("extern")) {
        bool isExtern = isWord("extern");
        try {
          parseFunction(res.module, isExtern);
        } catch (const SyntaxError &) {
          recoverToTopLevel();
        }
      } else {
        error("syntax-error", "expected 'def' or 'extern'");
        recoverToTopLevel();
      }
    }
    resolveCalls(res.module);
    res.diags = diags;
    auto structural = validateStructure(res.module);
    res.diags.insert(res.diags.end(), structural.begin(), structural.end());
    return res;
  }

private:
  struct SyntaxError {};

  Lexer lex;
  Token tok;
  std::vector<Diagnostic> diags;
  Function *fn = nullptr;
  std::map<std::string, ValueId> names;

  SourceSpan spanFrom(SourceLoc begin) const {
    return {lex.fileName(), begin, tok.loc};
  }
  SourceSpan here() const { return {lex.fileName(), tok.loc, tok.loc}; }

  void error(const std::string &cls, const std::string &msg) {
    diags.push_back({Severity::Error, cls, here(), msg, {}});
  }
  void errorAt(const std::string &cls, SourceSpan loc,
               const std::string &msg) {
    diags.push_back({Severity::Error, std::move(cls), std::move(loc), msg, {}});
  }

  [[noreturn]] void fail(const std::string &msg) {
    error("syntax-error", msg);
    throw SyntaxError{};
  }

  void consume() { tok = lex.next(); }

  bool isWord(const char *w) const {
    return tok.kind == Tok::Word && tok.text == w;
  }

  void expect(Tok k, const char *what) {
    if (tok.kind != k)
      fail(std::string("expected ") + what);
    consume();
  }

  void expectWord(const char *w) {
    if (!isWord(w))
      fail(std::string("expected '") + w + "'");
    consume();
  }

  std::string expectPercent() {
    if (tok.kind != Tok::Percent)
      fail("expected an SSA name");
    std::string n = tok.text;
    consume();
    return n;
  }

  int64_t expectInt() {
    if (tok.kind != Tok::Int)
      fail("expected an integer literal");
    int64_t v = tok.value;
    consume();
    return v;
  }

  int64_t expectNonNegInt(const char *what) {
    SourceSpan loc = here();
    int64_t v = expectInt();
    if (v < 0) {
      errorAt("negative-offset", loc,
              std::string(what) + " must be non-negative");
      v = 0;
    }
    return v;
  }

  void recoverToTopLevel() {
    int depth = 0;
    while (tok.kind != Tok::Eof) {
      if (tok.kind == Tok::LBrace)
        ++depth;
      else if (tok.kind == Tok::RBrace && depth > 0)
        --depth;
      else if (depth == 0 && (isWord("def") || isWord("extern")))
        return;
      consume();
    }
  }

  // Defines a new SSA value; forward references may have created a
  // placeholder already.
  ValueId defineValue(const std::string &name, Type type) {
    auto it = names.find(name);
    if (it != names.end()) {
      ValueDef &d = fn->val(it->second);
      if (d.type.kind != TypeKind::Int || d.type.width != 0) {
        error("duplicate-ssa-name", "redefinition of %" + name);
        return it->second;
      }
      d.type = std::move(type);
      return it->second;
    }
    ValueId id = fn->addValue(name, std::move(type));
    names[name] = id;
    return id;
  }

  // Placeholder-creating lookup; validate_structure reports values that
  // are referenced but never defined.
  ValueId useValue(const std::string &name) {
    auto it = names.find(name);
    if (it != names.end())
      return it->second;
    ValueId id = fn->addValue(name, Type::makeInt(0));
    names[name] = id;
    return id;
  }

  ValueId parseOperand() {
    if (tok.kind == Tok::Percent)
      return useValue(expectPercent());
    if (tok.kind == Tok::Int) {
      int64_t v = tok.value;
      consume();
      return fn->addLiteral(v);
    }
    fail("expected an operand");
  }

  TimeExpr parseTimeExpr() {
    TimeExpr te;
    te.base = useValue(expectPercent());
    if (isWord("offset")) {
      consume();
      te.offset = expectNonNegInt("time offset");
    }
    return te;
  }

  TimeExpr parseAtTime() {
    expectWord("at");
    return parseTimeExpr();
  }

  // "16", "i32", "f64" pieces of a memref shape token.
  Type parseScalarTypeWord(const std::string &w) {
    if (w == "const")
      return Type::makeConst();
    if (w.size() >= 2 && (w[0] == 'i' || w[0] == 'f')) {
      bool digits = true;
      for (size_t i = 1; i < w.size(); ++i)
        digits &= std::isdigit((unsigned char)w[i]) != 0;
      if (digits) {
        int width = std::stoi(w.substr(1));
        if (width < 1 || width > 64)
          error("unknown-type", "unsupported bit width in '" + w + "'");
        return w[0] == 'i' ? Type::makeInt(width) : Type::makeFloat(width);
      }
    }
    errorAt("unknown-type", here(), "unknown type '" + w + "'");
    return Type::makeInt(32);
  }

  Type parseType() {
    if (isWord("memref"))
      return parseMemrefType();
    if (tok.kind != Tok::Word)
      fail("expected a type");
    std::string w = tok.text;
    Type t = parseScalarTypeWord(w);
    consume();
    return t;
  }

  // memref<4x16xi32, [dist, packed], rw> with optional trailing storage
  // kind (ram|reg); dimension kinds default to packed, port to rw.
  Type parseMemrefType() {
    expectWord("memref");
    expect(Tok::Less, "'<'");
    MemrefType mt;
    // Shape: INT ("xNN")* "x<elem>" — 'x'-joined pieces arrive as one word.
    mt.shape.push_back(expectInt());
    if (tok.kind != Tok::Word || tok.text[0] != 'x')
      fail("expected 'x<type>' in memref shape");
    std::string w = tok.text;
    std::vector<std::string> parts;
    size_t start = 1;
    for (size_t i = 1; i <= w.size(); ++i) {
      if (i == w.size() || w[i] == 'x') {
        parts.push_back(w.substr(start, i - start));
        start = i + 1;
      }
    }
    for (size_t i = 0; i < parts.size(); ++i) {
      const std::string &p = parts[i];
      if (i + 1 == parts.size()) {
        Type elem = parseScalarTypeWord(p);
        mt.elemKind = elem.kind;
        mt.elemWidth = elem.width;
      } else {
        if (p.empty() || !std::isdigit((unsigned char)p[0]))
          fail("malformed memref shape");
        mt.shape.push_back(std::stoll(p));
      }
    }
    consume();
    for (int64_t e : mt.shape)
      if (e <= 0)
        error("unknown-type", "memref extents must be positive");
    mt.dims.assign(mt.shape.size(), DimKind::Packed);
    if (tok.kind == Tok::Comma) {
      consume();
      if (tok.kind == Tok::LBracket) {
        consume();
        size_t i = 0;
        while (tok.kind != Tok::RBracket) {
          if (i > 0)
            expect(Tok::Comma, "','");
          if (isWord("packed"))
            ;
          else if (isWord("dist")) {
            if (i < mt.dims.size())
              mt.dims[i] = DimKind::Dist;
          } else
            fail("expected 'packed' or 'dist'");
          consume();
          ++i;
        }
        if (i != mt.dims.size())
          error("unknown-type",
                "dimension kind list does not match memref rank");
        consume();
        if (tok.kind == Tok::Comma)
          consume();
        else {
          expect(Tok::Greater, "'>'");
          return Type::makeMemref(std::move(mt));
        }
      }
      // port and optional storage
      if (isWord("r"))
        mt.port = Port::Read;
      else if (isWord("w"))
        mt.port = Port::Write;
      else if (isWord("rw"))
        mt.port = Port::ReadWrite;
      else
        fail("expected memref port kind (r|w|rw)");
      consume();
      if (tok.kind == Tok::Comma) {
        consume();
        if (isWord("ram"))
          mt.storage = Storage::Ram;
        else if (isWord("reg"))
          mt.storage = Storage::Reg;
        else
          fail("expected memref storage kind (ram|reg)");
        consume();
      }
    }
    expect(Tok::Greater, "'>'");
    return Type::makeMemref(std::move(mt));
  }

  void parseFunction(Module &mod, bool isExtern) {
    SourceLoc begin = tok.loc;
    consume(); // def / extern
    if (tok.kind != Tok::AtName)
      fail("expected a function name");
    mod.functions.emplace_back();
    fn = &mod.functions.back();
    names.clear();
    fn->name = tok.text;
    fn->isExtern = isExtern;
    fn->loc = spanFrom(begin);
    for (size_t i = 0; i + 1 < mod.functions.size(); ++i)
      if (mod.functions[i].name == fn->name)
        error("duplicate-ssa-name", "redefinition of function @" + fn->name);
    consume();
    expect(Tok::LParen, "'('");
    while (tok.kind != Tok::RParen) {
      if (!fn->params.empty())
        expect(Tok::Comma, "','");
      std::string pname = expectPercent();
      expect(Tok::Colon, "':'");
      Type t = parseType();
      Param p;
      p.value = defineValue(pname, std::move(t));
      if (isWord("delay")) {
        consume();
        p.delay = expectNonNegInt("argument delay");
      }
      fn->params.push_back(p);
    }
    consume(); // ')'
    if (tok.kind == Tok::Arrow) {
      consume();
      expect(Tok::LParen, "'('");
      while (tok.kind != Tok::RParen) {
        if (!fn->results.empty())
          expect(Tok::Comma, "','");
        ResultDecl r;
        r.type = parseType();
        expectWord("delay");
        r.delay = expectNonNegInt("result delay");
        fn->results.push_back(std::move(r));
      }
      consume();
    }
    if (isExtern) {
      fn->loc = spanFrom(begin);
      return;
    }
    expectWord("at");
    std::string rootName = expectPercent();
    fn->rootTime = defineValue(rootName, Type::makeTime());
    fn->val(fn->rootTime).time = {TimeOrigin::FunctionEntry, kNoValue, 0};
    fn->loc = spanFrom(begin);
    expect(Tok::LBrace, "'{'");
    fn->body = parseRegion();
  }

  std::vector<Operation> parseRegion() {
    std::vector<Operation> ops;
    while (tok.kind != Tok::RBrace) {
      if (tok.kind == Tok::Eof)
        fail("unexpected end of file inside a region");
      ops.push_back(parseOp());
    }
    consume(); // '}'
    return ops;
  }

  Operation parseOp() {
    SourceLoc begin = tok.loc;
    std::vector<std::string> resultNames;
    if (tok.kind == Tok::Percent) {
      resultNames.push_back(expectPercent());
      while (tok.kind == Tok::Comma) {
        consume();
        resultNames.push_back(expectPercent());
      }
      expect(Tok::Equal, "'='");
    }
    if (tok.kind != Tok::Word)
      fail("expected an opcode");
    std::string opname = tok.text;
    Operation op;

    auto finish = [&](Operation &o) {
      o.loc = spanFrom(begin);
      return o;
    };
    auto oneResult = [&]() -> const std::string & {
      if (resultNames.size() != 1)
        fail("'" + opname + "' defines exactly one result");
      return resultNames[0];
    };
    auto noResult = [&]() {
      if (!resultNames.empty())
        fail("'" + opname + "' defines no results");
    };

    if (opname == "add" || opname == "sub" || opname == "mult") {
      op.op = opname == "add"   ? Opcode::Add
              : opname == "sub" ? Opcode::Sub
                                : Opcode::Mult;
      consume();
      op.operands.push_back(parseOperand());
      expect(Tok::Comma, "','");
      op.operands.push_back(parseOperand());
      expect(Tok::Colon, "':'");
      Type t = parseType();
      op.sched = parseAtTime();
      op.results.push_back(defineValue(oneResult(), std::move(t)));
      return finish(op);
    }
    if (opname == "select") {
      op.op = Opcode::Select;
      consume();
      for (int i = 0; i < 3; ++i) {
        if (i)
          expect(Tok::Comma, "','");
        op.operands.push_back(parseOperand());
      }
      expect(Tok::Colon, "':'");
      Type t = parseType();
      op.sched = parseAtTime();
      op.results.push_back(defineValue(oneResult(), std::move(t)));
      return finish(op);
    }
    if (opname == "bit_slice") {
      op.op = Opcode::BitSlice;
      consume();
      op.operands.push_back(parseOperand());
      expect(Tok::LBracket, "'['");
      op.hi = (int)expectNonNegInt("slice bound");
      expect(Tok::Colon, "':'");
      op.lo = (int)expectNonNegInt("slice bound");
      expect(Tok::RBracket, "']'");
      expect(Tok::Colon, "':'");
      Type t = parseType();
      op.sched = parseAtTime();
      op.results.push_back(defineValue(oneResult(), std::move(t)));
      return finish(op);
    }
    if (opname == "mem_read") {
      op.op = Opcode::MemRead;
      consume();
      op.operands.push_back(useValue(expectPercent()));
      expect(Tok::LBracket, "'['");
      while (tok.kind != Tok::RBracket) {
        if (op.operands.size() > 1)
          expect(Tok::Comma, "','");
        op.operands.push_back(parseOperand());
      }
      consume();
      expect(Tok::Colon, "':'");
      Type t = parseType();
      op.sched = parseAtTime();
      op.results.push_back(defineValue(oneResult(), std::move(t)));
      return finish(op);
    }
    if (opname == "mem_write") {
      noResult();
      op.op = Opcode::MemWrite;
      consume();
      op.operands.push_back(parseOperand());
      expectWord("to");
      op.operands.push_back(useValue(expectPercent()));
      expect(Tok::LBracket, "'['");
      while (tok.kind != Tok::RBracket) {
        if (op.operands.size() > 2)
          expect(Tok::Comma, "','");
        op.operands.push_back(parseOperand());
      }
      consume();
      op.sched = parseAtTime();
      return finish(op);
    }
    if (opname == "delay") {
      op.op = Opcode::Delay;
      consume();
      op.operands.push_back(parseOperand());
      expectWord("by");
      op.amount = expectNonNegInt("delay amount");
      op.sched = parseAtTime();
      Type t = fn->val(op.operands[0]).type;
      if (!t.isPrimitive())
        t = Type::makeInt(32); // placeholder; validate flags bad sources
      op.results.push_back(defineValue(oneResult(), std::move(t)));
      return finish(op);
    }
    if (opname == "constant") {
      op.op = Opcode::Constant;
      consume();
      if (tok.kind != Tok::Int)
        fail("expected an integer literal");
      op.amount = tok.value;
      consume();
      ValueId r = defineValue(oneResult(), Type::makeConst());
      fn->val(r).literal = op.amount;
      fn->val(r).knownConst = true;
      op.results.push_back(r);
      return finish(op);
    }
    if (opname == "alloc") {
      op.op = Opcode::Alloc;
      consume();
      expect(Tok::Colon, "':'");
      size_t i = 0;
      do {
        if (i > 0)
          expect(Tok::Comma, "','");
        if (i >= resultNames.size())
          fail("alloc has more types than results");
        Type t = parseMemrefType();
        op.results.push_back(defineValue(resultNames[i], std::move(t)));
        ++i;
      } while (tok.kind == Tok::Comma);
      if (i != resultNames.size())
        fail("alloc has more results than types");
      return finish(op);
    }
    if (opname == "time") {
      op.op = Opcode::TimeDef;
      consume();
      TimeExpr te = parseTimeExpr();
      op.operands.push_back(te.base);
      ValueId r = defineValue(oneResult(), Type::makeTime());
      fn->val(r).time = {TimeOrigin::Derived, te.base, te.offset};
      op.results.push_back(r);
      return finish(op);
    }
    if (opname == "call") {
      op.op = Opcode::Call;
      consume();
      if (tok.kind != Tok::AtName)
        fail("expected a callee name");
      op.callee = tok.text;
      consume();
      expect(Tok::LParen, "'('");
      while (tok.kind != Tok::RParen) {
        if (!op.operands.empty())
          expect(Tok::Comma, "','");
        op.operands.push_back(parseOperand());
      }
      consume();
      op.sched = parseAtTime();
      // Result types come from the callee signature, resolved module-wide
      // after parsing.
      for (auto &rn : resultNames)
        op.results.push_back(defineValue(rn, Type::makeInt(0)));
      return finish(op);
    }
    if (opname == "yield") {
      noResult();
      op.op = Opcode::Yield;
      consume();
      op.sched = parseAtTime();
      return finish(op);
    }
    if (opname == "return") {
      noResult();
      op.op = Opcode::Return;
      consume();
      if (tok.kind == Tok::Percent || tok.kind == Tok::Int) {
        op.operands.push_back(parseOperand());
        while (tok.kind == Tok::Comma) {
          consume();
          op.operands.push_back(parseOperand());
        }
      }
      op.sched = parseAtTime();
      return finish(op);
    }
    if (opname == "for" || opname == "unroll_for") {
      noResult();
      op.op = opname == "for" ? Opcode::For : Opcode::UnrollFor;
      consume();
      std::string ivName = expectPercent();
      Type ivType = Type::makeInt(32);
      if (tok.kind == Tok::Colon) {
        consume();
        ivType = parseType();
      }
      expect(Tok::Equal, "'='");
      op.operands.push_back(parseOperand());
      expectWord("to");
      op.operands.push_back(parseOperand());
      expectWord("step");
      op.operands.push_back(parseOperand());
      // Induction values of fully unrolled loops are compile time consts.
      op.inductionVar = defineValue(
          ivName, op.op == Opcode::UnrollFor ? Type::makeConst() : ivType);
      while (isWord("counter")) {
        consume();
        LoopCounter c;
        std::string cname = expectPercent();
        expect(Tok::Equal, "'='");
        c.init = expectInt();
        expectWord("step");
        c.step = expectInt();
        expect(Tok::Colon, "':'");
        Type ct = parseType();
        c.width = ct.width;
        c.result = defineValue(cname, std::move(ct));
        op.counters.push_back(c);
      }
      expectWord("iter_time");
      std::string itName = expectPercent();
      op.iterTime = defineValue(itName, Type::makeTime());
      fn->val(op.iterTime).time = {TimeOrigin::LoopIteration, kNoValue, 0};
      op.sched = parseAtTime();
      expect(Tok::LBrace, "'{'");
      op.body = parseRegion();
      if (isWord("yield_result")) {
        consume();
        std::string ctName = expectPercent();
        op.completionTime = defineValue(ctName, Type::makeTime());
        fn->val(op.completionTime).time = {TimeOrigin::LoopCompletion,
                                           kNoValue, 0};
      }
      return finish(op);
    }
    fail("unknown operation '" + opname + "'");
  }

  // Assigns call result types from callee signatures.
  void resolveCalls(Module &mod) {
    for (auto &f : mod.functions) {
      walkOpsMut(f.body, [&](Operation &op) {
        if (op.op != Opcode::Call)
          return;
        const Function *callee = mod.find(op.callee);
        if (!callee)
          return;
        for (size_t i = 0;
             i < op.results.size() && i < callee->results.size(); ++i)
          f.val(op.results[i]).type = callee->results[i].type;
      });
    }
  }
};

inline ParseResult parse(std::string source, std::string file = "<input>") {
  return Parser(std::move(source), std::move(file)).parseModule();
}

} // namespace hirc

#endif
