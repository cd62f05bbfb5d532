#pragma once

#include "lesplat/relevancy.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lesplat {

enum class PromptMode { Attention, Object };

/// Scene metadata substituted into the user prompt. `object` is used in object mode only.
struct PromptContext {
    PromptMode mode = PromptMode::Attention;
    std::string road_type;
    std::string weather;
    std::string time_of_day;
    std::string object;
};

void validate(const PromptContext& ctx);

struct Prompt {
    std::string system;
    std::string user;
};

/// The system message lists the three-part reply format; the user message is either the
/// attention template or "show the {object}.".
Prompt build_prompt(const PromptContext& ctx);

/// Parses a reply of the form
///
///     Main Positive: <phrase>
///     Helping Positives:
///     - <phrase>            (or "1. <phrase>", "* <phrase>", or inline "a, b")
///     Negatives:
///     - <phrase>
///
/// Headers are case-insensitive and may carry a parenthetical. Negatives become canonicals.
QuerySpec parse_response(std::string_view text);

/// Canonical reply text for a query; parse_response(render_response(q)) == q.
std::string render_response(const QuerySpec& q);

/// Stable key for fixture lookups: FNV-1a 64 over system + '\0' + user, as 16 hex digits.
std::string prompt_hash(const Prompt& prompt);

using Fixtures = std::map<std::string, std::string>;
Fixtures fixtures_from_json(const std::string& text);
std::string fixtures_to_json(const Fixtures& fixtures);

struct ChatExchange {
    std::string system;
    std::string user;
    std::string model;
    std::string response;
    double latency_ms = 0.0;
    int retries = 0;
    std::vector<std::string> retry_log;
};

struct LlmClientConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "LESPLAT_API_KEY";
    std::string model = "gpt-3.5-turbo";
    double timeout_seconds = 30.0;
    int retries = 2;
    double backoff_base_seconds = 1.0;
    std::optional<std::filesystem::path> stub_fixture;
};

void validate(const LlmClientConfig& cfg);

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Minimal POST transport. Throws TransportError(0, ...) when no response arrives.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                              const std::string& body, double timeout_seconds) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport();

/// JSON body of an OpenAI-compatible chat-completion request at temperature 0.
std::string chat_request_body(const std::string& model, const Prompt& prompt);

/// choices[0].message.content, or ProtocolError.
std::string chat_response_content(const std::string& body);

/// Reply stored for `prompt`, or ValidationError naming the missing hash.
const std::string& fixture_reply(const Fixtures& fixtures, const Prompt& prompt);

using Sleeper = std::function<void(std::chrono::duration<double>)>;

/// Stub mode (cfg.stub_fixture set) answers from the fixture file and never touches `transport`.
/// Otherwise POSTs to cfg.endpoint, retrying transport failures, 408, 429 and 5xx with
/// exponential backoff base * 2^attempt.
std::pair<QuerySpec, ChatExchange> generate_query(const LlmClientConfig& cfg, const PromptContext& ctx,
                                                  HttpTransport* transport = nullptr, const Sleeper& sleep = {});

std::string query_spec_to_json(const QuerySpec& q);
QuerySpec query_spec_from_json(const std::string& text);

} // namespace lesplat
