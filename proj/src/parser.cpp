#include "cots/parser.hpp"

#include <cctype>
#include <functional>
#include <sstream>

namespace cots::parser {

using ast::SessionPtr;
using ast::SourceSpan;

namespace {

enum class Tok {
  Ident,
  Code,     // Cnnn
  Equals,
  Bang,
  Question,
  Dot,
  Comma,
  Colon,
  LParen,
  RParen,
  LBrace,
  RBrace,
  Plus,
  Amp,
  Lt,
  Gt,
  KwRec,
  KwEnd,
  Eof,
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Code: return "response code (Cnnn)";
    case Tok::Equals: return "'='";
    case Tok::Bang: return "'!'";
    case Tok::Question: return "'?'";
    case Tok::Dot: return "'.'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Plus: return "'+'";
    case Tok::Amp: return "'&'";
    case Tok::Lt: return "'<'";
    case Tok::Gt: return "'>'";
    case Tok::KwRec: return "'rec'";
    case Tok::KwEnd: return "'end'";
    case Tok::Eof: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind;
  std::string text;
  int code = 0;
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  std::vector<Token> lex() {
    std::vector<Token> out;
    while (true) {
      skip_ws_and_comments();
      if (pos_ >= text_.size()) {
        out.push_back(make(Tok::Eof, pos_, pos_));
        return out;
      }
      size_t start = pos_;
      char c = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
          ++pos_;
        std::string word = text_.substr(start, pos_ - start);
        if (word == "rec") {
          out.push_back(make(Tok::KwRec, start, pos_));
        } else if (word == "end") {
          out.push_back(make(Tok::KwEnd, start, pos_));
        } else if (word.size() == 4 && word[0] == 'C' && std::isdigit((unsigned char)word[1]) &&
                   std::isdigit((unsigned char)word[2]) && std::isdigit((unsigned char)word[3])) {
          Token t = make(Tok::Code, start, pos_);
          t.text = word;
          t.code = std::stoi(word.substr(1));
          out.push_back(t);
        } else {
          Token t = make(Tok::Ident, start, pos_);
          t.text = word;
          out.push_back(t);
        }
        continue;
      }
      ++pos_;
      switch (c) {
        case '=': out.push_back(make(Tok::Equals, start, pos_)); break;
        case '!': out.push_back(make(Tok::Bang, start, pos_)); break;
        case '?': out.push_back(make(Tok::Question, start, pos_)); break;
        case '.': out.push_back(make(Tok::Dot, start, pos_)); break;
        case ',': out.push_back(make(Tok::Comma, start, pos_)); break;
        case ':': out.push_back(make(Tok::Colon, start, pos_)); break;
        case '(': out.push_back(make(Tok::LParen, start, pos_)); break;
        case ')': out.push_back(make(Tok::RParen, start, pos_)); break;
        case '{': out.push_back(make(Tok::LBrace, start, pos_)); break;
        case '}': out.push_back(make(Tok::RBrace, start, pos_)); break;
        case '+': out.push_back(make(Tok::Plus, start, pos_)); break;
        case '&': out.push_back(make(Tok::Amp, start, pos_)); break;
        case '<': out.push_back(make(Tok::Lt, start, pos_)); break;
        case '>': out.push_back(make(Tok::Gt, start, pos_)); break;
        default:
          throw SyntaxError(span_at(start, pos_), {},
                            std::string("unexpected character '") + c + "'");
      }
    }
  }

 private:
  Token make(Tok kind, size_t start, size_t end) {
    Token t;
    t.kind = kind;
    t.span = span_at(start, end);
    return t;
  }

  SourceSpan span_at(size_t start, size_t end) {
    SourceSpan s;
    s.begin = start;
    s.end = end;
    auto lc = [&](size_t off) {
      int line = 1, col = 1;
      for (size_t i = 0; i < off && i < text_.size(); ++i) {
        if (text_[i] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      return std::pair<int, int>{line, col};
    };
    auto [l1, c1] = lc(start);
    auto [l2, c2] = lc(end);
    s.line = l1;
    s.col = c1;
    s.end_line = l2;
    s.end_col = c2;
    return s;
  }

  void skip_ws_and_comments() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  const std::string& text_;
  size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<ParsedModel> file() {
    std::vector<ParsedModel> defs;
    while (peek().kind != Tok::Eof) defs.push_back(def());
    if (defs.empty()) fail({Tok::Ident}, "empty model file");
    return defs;
  }

 private:
  const Token& peek(size_t ahead = 0) const {
    size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  Token advance() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(std::vector<Tok> expected, const std::string& context = "") {
    std::vector<std::string> names;
    std::ostringstream msg;
    msg << "line " << peek().span.line << " col " << peek().span.col << ": expected ";
    for (size_t i = 0; i < expected.size(); ++i) {
      names.push_back(tok_name(expected[i]));
      msg << (i ? " or " : "") << names.back();
    }
    msg << ", found " << tok_name(peek().kind);
    if (!context.empty()) msg << " (" << context << ")";
    throw SyntaxError(peek().span, std::move(names), msg.str());
  }

  Token expect(Tok kind, const std::string& context = "") {
    if (peek().kind != kind) fail({kind}, context);
    return advance();
  }

  ParsedModel def() {
    ParsedModel m;
    m.name = expect(Tok::Ident, "model definition name").text;
    expect(Tok::Equals);
    m.root = session();
    return m;
  }

  SessionPtr session() {
    switch (peek().kind) {
      case Tok::KwEnd:
        advance();
        return ast::make_end();
      case Tok::KwRec: {
        advance();
        Token var = expect(Tok::Ident, "recursion variable");
        require_recvar(var);
        expect(Tok::Dot);
        return ast::make_rec(var.text, session());
      }
      case Tok::Ident: {
        Token var = advance();
        require_recvar(var);
        return ast::make_rec_var(var.text);
      }
      case Tok::LParen: {
        advance();
        SessionPtr s = session();
        expect(Tok::RParen);
        return s;
      }
      case Tok::Bang:
        return ast::make_internal({send_branch()});
      case Tok::Question:
        return ast::make_external({recv_branch()});
      case Tok::Plus: {
        advance();
        expect(Tok::LBrace);
        std::vector<ast::SendBranch> branches;
        branches.push_back(send_branch());
        while (peek().kind == Tok::Comma) {
          advance();
          branches.push_back(send_branch());
        }
        expect(Tok::RBrace);
        return ast::make_internal(std::move(branches));
      }
      case Tok::Amp: {
        advance();
        expect(Tok::LBrace);
        std::vector<ast::RecvBranch> branches;
        branches.push_back(recv_branch());
        while (peek().kind == Tok::Comma) {
          advance();
          branches.push_back(recv_branch());
        }
        expect(Tok::RBrace);
        return ast::make_external(std::move(branches));
      }
      default:
        fail({Tok::Bang, Tok::Question, Tok::Plus, Tok::Amp, Tok::KwRec, Tok::KwEnd, Tok::Ident,
              Tok::LParen},
             "session");
    }
  }

  void require_recvar(const Token& t) {
    if (t.text.empty() || !std::isupper(static_cast<unsigned char>(t.text[0])))
      throw SyntaxError(t.span, {"recursion variable"},
                        "line " + std::to_string(t.span.line) + " col " +
                            std::to_string(t.span.col) + ": recursion variable '" + t.text +
                            "' must begin with an uppercase letter");
  }

  ast::SendBranch send_branch() {
    ast::SendBranch b;
    SourceSpan start = peek().span;
    expect(Tok::Bang);
    b.op = expect(Tok::Ident, "operation id").text;
    expect(Tok::LParen);
    if (peek().kind != Tok::RParen) {
      b.args.push_back(arg());
      while (peek().kind == Tok::Comma) {
        advance();
        b.args.push_back(arg());
      }
    }
    SourceSpan close = expect(Tok::RParen).span;
    b.span = join(start, close);
    expect(Tok::Dot);
    b.cont = session();
    return b;
  }

  ast::Arg arg() {
    ast::Arg a;
    a.name = expect(Tok::Ident, "argument").text;
    if (peek().kind == Tok::Colon) {
      advance();
      a.type = type_name();
      expect(Tok::LParen, "generator");
      a.generator = expect(Tok::Ident, "generator id").text;
      expect(Tok::RParen);
    }
    return a;
  }

  ast::RecvBranch recv_branch() {
    ast::RecvBranch b;
    SourceSpan start = peek().span;
    expect(Tok::Question);
    if (peek().kind != Tok::Code) fail({Tok::Code}, "receive prefix");
    b.code = advance().code;
    expect(Tok::LParen);
    if (peek().kind != Tok::RParen) {
      b.decls.push_back(decl());
      while (peek().kind == Tok::Comma) {
        advance();
        b.decls.push_back(decl());
      }
    }
    SourceSpan close = expect(Tok::RParen).span;
    b.span = join(start, close);
    if (peek().kind == Tok::Lt) {
      advance();
      ast::AssertionCall call;
      call.predicate = expect(Tok::Ident, "assertion predicate").text;
      expect(Tok::LParen);
      call.args.push_back(expect(Tok::Ident, "assertion argument").text);
      while (peek().kind == Tok::Comma) {
        advance();
        call.args.push_back(expect(Tok::Ident, "assertion argument").text);
      }
      expect(Tok::RParen);
      expect(Tok::Gt);
      b.assertion = std::move(call);
    }
    expect(Tok::Dot);
    b.cont = session();
    return b;
  }

  std::pair<std::string, ast::TypeName> decl() {
    std::string name = expect(Tok::Ident, "declaration").text;
    expect(Tok::Colon);
    return {std::move(name), type_name()};
  }

  ast::TypeName type_name() {
    Token t = expect(Tok::Ident, "type");
    return ast::TypeName::parse(t.text);
  }

  static SourceSpan join(SourceSpan a, SourceSpan b) {
    SourceSpan s = a;
    s.end = b.end;
    s.end_line = b.end_line;
    s.end_col = b.end_col;
    return s;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

void collect_spans(const SessionPtr& s, std::map<int, SourceSpan>& spans) {
  if (!s) return;
  if (const auto* rec = std::get_if<ast::Rec>(&s->node)) {
    collect_spans(rec->body, spans);
  } else if (const auto* ic = std::get_if<ast::InternalChoice>(&s->node)) {
    for (const auto& b : ic->branches) {
      spans[b.id] = b.span;
      collect_spans(b.cont, spans);
    }
  } else if (const auto* ec = std::get_if<ast::ExternalChoice>(&s->node)) {
    for (const auto& b : ec->branches) {
      spans[b.id] = b.span;
      collect_spans(b.cont, spans);
    }
  }
}

}  // namespace

std::vector<ParsedModel> parse_file(const std::string& text) {
  Lexer lex(text);
  Parser p(lex.lex());
  std::vector<ParsedModel> defs = p.file();
  for (auto& m : defs) {
    auto errors = ast::check_well_formed(m.root);
    if (!errors.empty()) {
      std::ostringstream msg;
      msg << "model '" << m.name << "' is not well-formed:";
      for (const auto& e : errors) msg << "\n  " << e.path << ": " << e.message;
      throw ModelError(std::move(errors), msg.str());
    }
    m.prefix_count = ast::number_prefixes(m.root);
    collect_spans(m.root, m.spans);
  }
  return defs;
}

ParsedModel parse_model(const std::string& text, const std::string& name) {
  auto defs = parse_file(text);
  if (name.empty()) {
    if (defs.size() != 1)
      throw SyntaxError({}, {},
                        "file defines " + std::to_string(defs.size()) +
                            " models; select one by name");
    return std::move(defs.front());
  }
  for (auto& d : defs)
    if (d.name == name) return std::move(d);
  throw SyntaxError({}, {}, "no model named '" + name + "' in file");
}

namespace {

struct Renderer {
  std::ostringstream out;

  void indent(int depth) {
    for (int i = 0; i < depth; ++i) out << "  ";
  }

  void session(const SessionPtr& s, int depth) {
    if (std::holds_alternative<ast::End>(s->node)) {
      out << "end";
      return;
    }
    if (const auto* rv = std::get_if<ast::RecVar>(&s->node)) {
      out << rv->var;
      return;
    }
    if (const auto* rec = std::get_if<ast::Rec>(&s->node)) {
      out << "rec " << rec->var << ".(\n";
      indent(depth + 1);
      session(rec->body, depth + 1);
      out << "\n";
      indent(depth);
      out << ")";
      return;
    }
    if (const auto* ic = std::get_if<ast::InternalChoice>(&s->node)) {
      if (ic->branches.size() == 1) {
        send(ic->branches[0], depth);
        return;
      }
      out << "+{\n";
      for (size_t i = 0; i < ic->branches.size(); ++i) {
        indent(depth + 1);
        send(ic->branches[i], depth + 1);
        if (i + 1 < ic->branches.size()) out << ",";
        out << "\n";
      }
      indent(depth);
      out << "}";
      return;
    }
    const auto& ec = std::get<ast::ExternalChoice>(s->node);
    if (ec.branches.size() == 1) {
      recv(ec.branches[0], depth);
      return;
    }
    out << "&{\n";
    for (size_t i = 0; i < ec.branches.size(); ++i) {
      indent(depth + 1);
      recv(ec.branches[i], depth + 1);
      if (i + 1 < ec.branches.size()) out << ",";
      out << "\n";
    }
    indent(depth);
    out << "}";
  }

  void send(const ast::SendBranch& b, int depth) {
    out << "!" << b.op << "(";
    for (size_t i = 0; i < b.args.size(); ++i) {
      if (i) out << ", ";
      const auto& a = b.args[i];
      out << a.name;
      if (a.is_fresh()) out << ": " << a.type->str() << "(" << a.generator << ")";
    }
    out << ").";
    session(b.cont, depth);
  }

  void recv(const ast::RecvBranch& b, int depth) {
    out << "?C";
    out.width(3);
    out.fill('0');
    out << b.code;
    out.width(0);
    out << "(";
    for (size_t i = 0; i < b.decls.size(); ++i) {
      if (i) out << ", ";
      out << b.decls[i].first << ": " << b.decls[i].second.str();
    }
    out << ")";
    if (b.assertion) {
      out << "<" << b.assertion->predicate << "(";
      for (size_t i = 0; i < b.assertion->args.size(); ++i) {
        if (i) out << ", ";
        out << b.assertion->args[i];
      }
      out << ")>";
    }
    out << ".";
    session(b.cont, depth);
  }
};

}  // namespace

std::string render_session(const ast::SessionPtr& s) {
  Renderer r;
  r.session(s, 0);
  return r.out.str();
}

std::string render_model(const ParsedModel& model) {
  return model.name + " = " + render_session(model.root) + "\n";
}

}  // namespace cots::parser
