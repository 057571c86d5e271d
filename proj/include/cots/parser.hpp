#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cots/ast.hpp"

namespace cots::parser {

// Raised on malformed concrete syntax. `expected` lists the token kinds that
// would have been accepted at `span`.
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(ast::SourceSpan span, std::vector<std::string> expected, const std::string& what)
      : std::runtime_error(what), span(span), expected(std::move(expected)) {}
  ast::SourceSpan span;
  std::vector<std::string> expected;
};

// Raised when a syntactically valid model violates a structural invariant.
class ModelError : public std::runtime_error {
 public:
  ModelError(std::vector<ast::WellFormednessError> errors, const std::string& what)
      : std::runtime_error(what), errors(std::move(errors)) {}
  std::vector<ast::WellFormednessError> errors;
};

struct ParsedModel {
  std::string name;
  ast::SessionPtr root;
  int prefix_count = 0;
  std::map<int, ast::SourceSpan> spans;  // prefix id -> source location
};

// Parses a whole `.capi` file: one or more `Name = session` definitions.
// Every definition is checked for well-formedness; prefix ids are assigned
// in source order.
std::vector<ParsedModel> parse_file(const std::string& text);

// Single-definition convenience. When `name` is empty the file must contain
// exactly one definition; otherwise the named one is selected.
ParsedModel parse_model(const std::string& text, const std::string& name = "");

// Canonical concrete syntax; parse_model(render_model(m)) is structurally
// equal to m.
std::string render_model(const ParsedModel& model);
std::string render_session(const ast::SessionPtr& s);

}  // namespace cots::parser
