#include "weakdiff/promptref.hpp"

#include <httplib.h>

#include <algorithm>
#include <deque>
#include <istream>
#include <json.hpp>
#include <set>

#include "weakdiff/weaksup.hpp"

namespace weakdiff {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool contains(const TokenList& list, const std::string& token) {
  return std::find(list.begin(), list.end(), token) != list.end();
}

// Original in-vocabulary tokens that `refined` is missing.
std::vector<std::string> dropped_tokens(std::span<const std::string> prompt, const TokenList& refined,
                                        const Vocabulary& vocab) {
  std::vector<std::string> missing;
  for (const std::string& tok : prompt) {
    if (vocab.contains(tok) && !contains(refined, tok) && !contains(missing, tok)) missing.push_back(tok);
  }
  return missing;
}

}  // namespace

RefinementRuleSet RefinementRuleSet::from_rules(std::map<std::string, TokenList> rules, const Vocabulary& vocab,
                                                std::string version) {
  for (const auto& [key, enrich] : rules) {
    if (!vocab.contains(key)) throw std::invalid_argument("rules: unknown token '" + key + "'");
    for (const std::string& tok : enrich) {
      if (!vocab.contains(tok)) {
        throw std::invalid_argument("rules: enrichment '" + tok + "' for '" + key + "' is not in the vocabulary");
      }
    }
  }
  RefinementRuleSet set;
  set.rules_ = std::move(rules);
  set.version_ = std::move(version);
  return set;
}

RefinementRuleSet RefinementRuleSet::parse(std::istream& in, const Vocabulary& vocab) {
  std::map<std::string, TokenList> rules;
  std::string version = "1";
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (text.rfind("@version", 0) == 0) {
      version = trim(text.substr(8));
      if (version.empty()) throw std::invalid_argument("rules line " + std::to_string(line_no) + ": empty version");
      continue;
    }
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("rules line " + std::to_string(line_no) + ": expected 'token: a, b, ...'");
    }
    const std::string key = trim(text.substr(0, colon));
    if (key.empty()) throw std::invalid_argument("rules line " + std::to_string(line_no) + ": empty token");
    TokenList enrich;
    std::string rest = text.substr(colon + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      const auto comma = rest.find(',', start);
      const std::string tok = trim(rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (!tok.empty() && !contains(enrich, tok)) enrich.push_back(tok);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rules.emplace(key, std::move(enrich)).second) {
      throw std::invalid_argument("rules line " + std::to_string(line_no) + ": duplicate rule for '" + key + "'");
    }
  }
  return from_rules(std::move(rules), vocab, std::move(version));
}

RefinementRuleSet RefinementRuleSet::default_for(const Vocabulary& vocab) {
  std::map<std::string, TokenList> rules;
  for (std::size_t k = 0; k < style_count(vocab); ++k) {
    TokenList set = style_attributes(vocab, k);
    rules.emplace(set.front(), TokenList(set.begin() + 1, set.end()));
  }
  return from_rules(std::move(rules), vocab);
}

const TokenList* RefinementRuleSet::enrichments(const std::string& token) const {
  const auto it = rules_.find(token);
  return it == rules_.end() ? nullptr : &it->second;
}

TokenList RuleBasedRefiner::refine(std::span<const std::string> prompt) const {
  TokenList out(prompt.begin(), prompt.end());
  std::deque<std::string> queue(prompt.begin(), prompt.end());
  std::set<std::string> expanded;
  while (!queue.empty()) {
    const std::string tok = queue.front();
    queue.pop_front();
    if (!expanded.insert(tok).second) continue;
    if (const TokenList* more = rules_.enrichments(tok)) {
      for (const std::string& e : *more) {
        if (!contains(out, e)) out.push_back(e);
        queue.push_back(e);
      }
    }
  }
  return out;
}

HttpTransport default_http_transport() {
  return [](const ExternalRefinerConfig& cfg, const std::string& body) -> HttpResponse {
    const auto scheme = cfg.endpoint.find("://");
    const auto path_start = cfg.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    const std::string base = cfg.endpoint.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : cfg.endpoint.substr(path_start);

    httplib::Client client(base);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout);
    const auto sec = static_cast<time_t>(timeout.count() / 1000000);
    const auto usec = static_cast<time_t>(timeout.count() % 1000000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    auto res = client.Post(path, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  };
}

ExternalRefiner::ExternalRefiner(ExternalRefinerConfig cfg, Vocabulary vocab,
                                 std::shared_ptr<const RefinerClient> fallback, HttpTransport transport)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), fallback_(std::move(fallback)), transport_(std::move(transport)) {
  if (cfg_.endpoint.empty()) throw std::invalid_argument("external refiner: empty endpoint");
  if (cfg_.max_retries < 0) throw std::invalid_argument("external refiner: max_retries must be >= 0");
  if (cfg_.timeout.count() <= 0) throw std::invalid_argument("external refiner: timeout must be positive");
  if (cfg_.fallback && !fallback_) throw std::invalid_argument("external refiner: fallback enabled without a client");
}

ExternalRefiner::Validation ExternalRefiner::validate_response(std::span<const std::string> prompt,
                                                               const HttpResponse& response) const {
  if (response.status == 0) return {std::nullopt, "transport error: " + response.error};
  if (response.status != 200) return {std::nullopt, "HTTP status " + std::to_string(response.status)};
  const nlohmann::json doc = nlohmann::json::parse(response.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("tokens") || !doc["tokens"].is_array()) {
    return {std::nullopt, "response is not {\"tokens\": [...]}"};
  }
  TokenList tokens;
  for (const auto& item : doc["tokens"]) {
    if (!item.is_string()) return {std::nullopt, "non-string token in response"};
    tokens.push_back(item.get<std::string>());
    if (!vocab_.contains(tokens.back())) return {std::nullopt, "out-of-vocabulary token '" + tokens.back() + "'"};
  }
  const auto missing = dropped_tokens(prompt, tokens, vocab_);
  if (!missing.empty()) return {std::nullopt, "response drops prompt token '" + missing.front() + "'"};
  return {std::move(tokens), {}};
}

TokenList ExternalRefiner::refine(std::span<const std::string> prompt) const {
  const std::string body = nlohmann::json{{"prompt", TokenList(prompt.begin(), prompt.end())}}.dump();
  std::string problem;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    Validation v = validate_response(prompt, transport_(cfg_, body));
    if (v.tokens) return std::move(*v.tokens);
    problem = std::move(v.problem);
  }
  if (cfg_.fallback) return fallback_->refine(prompt);
  throw RefinerError("external refiner failed after " + std::to_string(cfg_.max_retries + 1) +
                     " attempt(s): " + problem);
}

TokenList refine_prompt(const RefinerClient& client, std::span<const std::string> prompt, const Vocabulary& vocab) {
  if (prompt.empty()) throw std::invalid_argument("refine_prompt: empty prompt");
  TokenList refined = client.refine(prompt);
  const auto missing = dropped_tokens(prompt, refined, vocab);
  if (!missing.empty()) throw RefinerError("refiner dropped prompt token '" + missing.front() + "'");
  return refined;
}

TokenList split_tokens(const std::string& text) {
  TokenList out;
  std::string current;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace weakdiff
