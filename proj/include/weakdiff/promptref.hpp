#pragma once

// Prompt enrichment. A refiner maps prompt tokens to a sequence that keeps
// every original token, in order, and appends vocabulary tokens.
//
// RuleBasedRefiner applies a token -> enrichments table to a fixed point, so
// refining twice equals refining once. ExternalRefiner asks a completion
// service over HTTP and accepts the answer only if it passes vocabulary and
// superset validation; otherwise it retries and then falls back or throws.

#include <chrono>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "weakdiff/embedding.hpp"

namespace weakdiff {

class RefinementRuleSet {
 public:
  RefinementRuleSet() = default;

  // Format, one rule per line:   token: enrichment, enrichment, ...
  // '#' starts a comment line, "@version <text>" sets the version. Keys and
  // enrichments must be in the vocabulary; duplicate keys are rejected.
  static RefinementRuleSet parse(std::istream& in, const Vocabulary& vocab);
  static RefinementRuleSet from_rules(std::map<std::string, TokenList> rules, const Vocabulary& vocab,
                                      std::string version = "1");
  // Garment -> the rest of its style's attribute set (see weaksup.hpp).
  static RefinementRuleSet default_for(const Vocabulary& vocab);

  const std::string& version() const { return version_; }
  std::size_t size() const { return rules_.size(); }
  // nullptr when the token has no rule.
  const TokenList* enrichments(const std::string& token) const;
  const std::map<std::string, TokenList>& rules() const { return rules_; }

 private:
  std::string version_ = "1";
  std::map<std::string, TokenList> rules_;
};

class RefinerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RefinerClient {
 public:
  virtual ~RefinerClient() = default;
  virtual TokenList refine(std::span<const std::string> prompt) const = 0;
};

class RuleBasedRefiner final : public RefinerClient {
 public:
  explicit RuleBasedRefiner(RefinementRuleSet rules) : rules_(std::move(rules)) {}
  // The prompt verbatim, then the breadth-first closure of its rules minus
  // tokens already present.
  TokenList refine(std::span<const std::string> prompt) const override;
  const RefinementRuleSet& rules() const { return rules_; }

 private:
  RefinementRuleSet rules_;
};

struct ExternalRefinerConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/refine
  std::chrono::milliseconds timeout{2000};
  int max_retries = 2;  // attempts = 1 + max_retries
  bool fallback = true;
};

struct HttpResponse {
  int status = 0;  // 0 on transport failure
  std::string body;
  std::string error;
};

// POSTs a JSON body to the configured endpoint.
using HttpTransport = std::function<HttpResponse(const ExternalRefinerConfig&, const std::string& body)>;

// Transport backed by a blocking HTTP client.
HttpTransport default_http_transport();

// Request:  {"prompt": ["tok", ...]}     Response: {"tokens": ["tok", ...]}
class ExternalRefiner final : public RefinerClient {
 public:
  ExternalRefiner(ExternalRefinerConfig cfg, Vocabulary vocab, std::shared_ptr<const RefinerClient> fallback,
                  HttpTransport transport = default_http_transport());
  TokenList refine(std::span<const std::string> prompt) const override;

  // Parsed token list, or an explanation of why the response is unusable.
  struct Validation {
    std::optional<TokenList> tokens;
    std::string problem;
  };
  Validation validate_response(std::span<const std::string> prompt, const HttpResponse& response) const;

 private:
  ExternalRefinerConfig cfg_;
  Vocabulary vocab_;
  std::shared_ptr<const RefinerClient> fallback_;
  HttpTransport transport_;
};

// Throws std::invalid_argument on an empty prompt and RefinerError when the
// client's answer drops an original in-vocabulary token.
TokenList refine_prompt(const RefinerClient& client, std::span<const std::string> prompt, const Vocabulary& vocab);

// Splits "a, b c" into tokens on commas and whitespace.
TokenList split_tokens(const std::string& text);

}  // namespace weakdiff
