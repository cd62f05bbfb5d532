#include "lesplat/query_gen.hpp"

#include "lesplat/errors.hpp"
#include "lesplat/io.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen parameter names.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <regex>
#include <sstream>
#include <thread>

namespace lesplat {

using json = nlohmann::json;

namespace {

constexpr const char* kSystemPrompt =
    "You are a helpful assistant for a computer vision task, providing structured information about objects "
    "to pay attention to while driving. Include both important objects and nearby objects that might be at "
    "the borders. Format your response exactly as follows:\n"
    "- Main Positive (object to pay attention to)\n"
    "- 1-4 Helping Positives (related terms or attributes)\n"
    "- 4-6 Negatives (objects to differentiate from, including similar objects, nearby objects, and "
    "background elements)\n"
    "Write each section as a header line ending in a colon, with the main positive on the same line and "
    "one item per line, prefixed with \"- \", under the other two headers.";

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string strip_emphasis(std::string s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((s[i] == '*' || s[i] == '_') && i + 1 < s.size() && s[i + 1] == s[i]) {
            ++i;
            continue;
        }
        out.push_back(s[i]);
    }
    return out;
}

/// Removes a leading "-", "*", "+", bullet, "1." or "1)" marker. Returns true if one was present.
bool strip_list_marker(std::string& line) {
    static const std::regex marker(R"(^\s*(?:[-*+]|\xE2\x80\xA2|\d+[.)])\s+)");
    std::smatch m;
    if (std::regex_search(line, m, marker)) {
        line = line.substr(static_cast<std::size_t>(m.length(0)));
        return true;
    }
    return false;
}

std::string clean_item(std::string item) {
    item = trim(item);
    while (!item.empty() && (item.back() == '.' || item.back() == ',' || item.back() == ';')) {
        item.pop_back();
    }
    item = trim(item);
    if (item.size() >= 2 && ((item.front() == '"' && item.back() == '"') || (item.front() == '\'' && item.back() == '\''))) {
        item = trim(item.substr(1, item.size() - 2));
    }
    return item;
}

std::vector<std::string> split_inline(const std::string& rest) {
    std::vector<std::string> out;
    std::stringstream ss(rest);
    std::string part;
    while (std::getline(ss, part, ',')) {
        auto item = clean_item(part);
        if (!item.empty()) {
            out.push_back(std::move(item));
        }
    }
    return out;
}

enum class Section { None, Main, Helping, Negatives };

const char* section_name(Section s) {
    switch (s) {
    case Section::Main: return "Main Positive";
    case Section::Helping: return "Helping Positives";
    case Section::Negatives: return "Negatives";
    case Section::None: break;
    }
    return "";
}

/// Recognises a section header line; `rest` receives anything after the colon.
Section match_header(const std::string& raw, std::string& rest) {
    static const std::regex header(
        R"(^\s*#*\s*(main\s+positive|helping\s+positives?|negatives?|canonical\s+phrases?)\s*(\([^)]*\))?\s*(:(.*))?$)",
        std::regex::icase);
    std::string line = strip_emphasis(raw);
    strip_list_marker(line);
    std::smatch m;
    if (!std::regex_match(line, m, header)) {
        return Section::None;
    }
    rest = m[4].matched ? m[4].str() : std::string();
    const std::string name = lower(m[1].str());
    if (name.starts_with("main")) {
        return Section::Main;
    }
    if (name.starts_with("helping")) {
        return Section::Helping;
    }
    return Section::Negatives;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct ParsedUrl {
    std::string base; // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
        throw ValidationError("endpoint must be an http(s) URL, got '" + url + "'");
    }
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                      const std::string& body, double timeout_seconds) override {
        const ParsedUrl u = parse_url(url);
        httplib::Client client(u.base);
        const auto secs = std::chrono::duration<double>(timeout_seconds);
        const auto whole = std::chrono::duration_cast<std::chrono::seconds>(secs);
        const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(secs - whole);
        client.set_connection_timeout(whole.count(), micros.count());
        client.set_read_timeout(whole.count(), micros.count());
        client.set_write_timeout(whole.count(), micros.count());
        httplib::Headers h;
        for (const auto& [k, v] : headers) {
            h.emplace(k, v);
        }
        auto res = client.Post(u.path, h, body, "application/json");
        if (!res) {
            throw TransportError(0, "request to " + url + " failed: " + httplib::to_string(res.error()));
        }
        return {res->status, res->body};
    }
};

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

} // namespace

void validate(const PromptContext& ctx) {
    if (ctx.mode == PromptMode::Object) {
        if (trim(ctx.object).empty()) {
            throw ValidationError("object mode needs an object phrase");
        }
        return;
    }
    if (!ctx.object.empty()) {
        throw ValidationError("attention mode takes no object phrase");
    }
    if (trim(ctx.road_type).empty() || trim(ctx.weather).empty() || trim(ctx.time_of_day).empty()) {
        throw ValidationError("attention mode needs road type, weather and time of day");
    }
}

Prompt build_prompt(const PromptContext& ctx) {
    validate(ctx);
    Prompt p;
    p.system = kSystemPrompt;
    if (ctx.mode == PromptMode::Object) {
        p.user = "show the " + trim(ctx.object) + ".";
    } else {
        p.user = "Driving through an intersection in an " + trim(ctx.road_type) + " on a " + trim(ctx.weather) + " " +
                 trim(ctx.time_of_day) + ", what objects should the driver pay attention to?";
    }
    return p;
}

QuerySpec parse_response(std::string_view text) {
    std::vector<std::string> main_items;
    std::vector<std::string> helping;
    std::vector<std::string> negatives;
    bool seen[4] = {false, false, false, false};
    Section current = Section::None;
    bool current_has_list = false;

    const auto bucket = [&](Section s) -> std::vector<std::string>& {
        switch (s) {
        case Section::Main: return main_items;
        case Section::Helping: return helping;
        default: return negatives;
        }
    };

    std::stringstream ss{std::string(text)};
    std::string line;
    while (std::getline(ss, line)) {
        if (trim(line).empty()) {
            continue;
        }
        std::string rest;
        const Section header = match_header(line, rest);
        if (header != Section::None) {
            current = header;
            current_has_list = false;
            seen[static_cast<int>(header)] = true;
            for (auto& item : split_inline(strip_emphasis(rest))) {
                bucket(current).push_back(std::move(item));
            }
            continue;
        }
        if (current == Section::None) {
            continue; // preamble
        }
        std::string item = strip_emphasis(line);
        const bool listed = strip_list_marker(item);
        item = clean_item(item);
        if (item.empty()) {
            continue;
        }
        // Unmarked text after the main positive or after a bulleted list is prose, not an item.
        if (!listed && ((current == Section::Main && !main_items.empty()) || current_has_list)) {
            current = Section::None;
            continue;
        }
        current_has_list = current_has_list || listed;
        bucket(current).push_back(std::move(item));
    }

    for (Section s : {Section::Main, Section::Helping, Section::Negatives}) {
        if (!seen[static_cast<int>(s)]) {
            throw ParseError(std::string("missing section '") + section_name(s) + "'");
        }
    }
    if (main_items.size() != 1) {
        throw ValidationError("expected exactly one main positive, got " + std::to_string(main_items.size()));
    }
    QuerySpec q{main_items.front(), std::move(helping), std::move(negatives)};
    validate(q);
    return q;
}

std::string render_response(const QuerySpec& q) {
    std::string out = "Main Positive: " + q.main_positive + "\nHelping Positives:\n";
    for (const auto& h : q.helping_positives) {
        out += "- " + h + "\n";
    }
    out += "Negatives:\n";
    for (const auto& c : q.canonicals) {
        out += "- " + c + "\n";
    }
    return out;
}

std::string prompt_hash(const Prompt& prompt) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto feed = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
    };
    feed(prompt.system);
    feed(std::string_view("\0", 1));
    feed(prompt.user);
    return hex64(h);
}

Fixtures fixtures_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed fixture JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("fixture file must map prompt hashes to response text");
    }
    Fixtures out;
    for (const auto& [k, v] : doc.items()) {
        if (!v.is_string()) {
            throw ParseError("fixture '" + k + "' must be a string");
        }
        out.emplace(k, v.get<std::string>());
    }
    return out;
}

std::string fixtures_to_json(const Fixtures& fixtures) {
    json doc = json::object();
    for (const auto& [k, v] : fixtures) {
        doc[k] = v;
    }
    return doc.dump(2);
}

void validate(const LlmClientConfig& cfg) {
    if (!(cfg.timeout_seconds > 0.0)) {
        throw ValidationError("timeout must be positive");
    }
    if (cfg.retries < 0) {
        throw ValidationError("retry count must be non-negative");
    }
    if (!(cfg.backoff_base_seconds >= 0.0)) {
        throw ValidationError("backoff base must be non-negative");
    }
}

std::unique_ptr<HttpTransport> make_http_transport() { return std::make_unique<HttplibTransport>(); }

std::string chat_request_body(const std::string& model, const Prompt& prompt) {
    json body = {{"model", model},
                 {"messages", json::array({{{"role", "system"}, {"content", prompt.system}},
                                           {{"role", "user"}, {"content", prompt.user}}})},
                 {"temperature", 0}};
    return body.dump();
}

std::string chat_response_content(const std::string& body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
    }
    try {
        const json& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) {
            throw ProtocolError("choices[0].message.content is not a string");
        }
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("response lacks choices[0].message.content: ") + e.what());
    }
}

const std::string& fixture_reply(const Fixtures& fixtures, const Prompt& prompt) {
    const std::string key = prompt_hash(prompt);
    const auto it = fixtures.find(key);
    if (it == fixtures.end()) {
        throw ValidationError("no fixture for prompt hash " + key + " (user: \"" + prompt.user + "\")");
    }
    return it->second;
}

std::pair<QuerySpec, ChatExchange> generate_query(const LlmClientConfig& cfg, const PromptContext& ctx,
                                                  HttpTransport* transport, const Sleeper& sleep) {
    validate(cfg);
    const Prompt prompt = build_prompt(ctx);
    ChatExchange ex;
    ex.system = prompt.system;
    ex.user = prompt.user;
    ex.model = cfg.model;
    const auto start = std::chrono::steady_clock::now();

    if (cfg.stub_fixture) {
        ex.model = "stub";
        ex.response = fixture_reply(fixtures_from_json(read_text_file(*cfg.stub_fixture)), prompt);
    } else {
        std::unique_ptr<HttpTransport> owned;
        if (!transport) {
            owned = make_http_transport();
            transport = owned.get();
        }
        std::vector<std::pair<std::string, std::string>> headers;
        if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }
        const std::string body = chat_request_body(cfg.model, prompt);
        const Sleeper pause = sleep ? sleep : Sleeper([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); });

        for (int attempt = 0;; ++attempt) {
            HttpResponse res;
            std::string failure;
            try {
                res = transport->post(cfg.endpoint, headers, body, cfg.timeout_seconds);
            } catch (const TransportError& e) {
                res.status = 0;
                failure = e.what();
            }
            if (res.status >= 200 && res.status < 300) {
                ex.response = chat_response_content(res.body);
                break;
            }
            if (failure.empty()) {
                failure = "HTTP " + std::to_string(res.status);
            }
            if (!retryable(res.status) || attempt >= cfg.retries) {
                throw TransportError(res.status, "chat completion failed after " + std::to_string(attempt + 1) +
                                                     " attempt(s): " + failure);
            }
            const double delay = cfg.backoff_base_seconds * std::ldexp(1.0, attempt);
            ex.retry_log.push_back("attempt " + std::to_string(attempt + 1) + " failed (" + failure +
                                   "), retrying in " + std::to_string(delay) + " s");
            ++ex.retries;
            pause(std::chrono::duration<double>(delay));
        }
    }
    ex.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    QuerySpec q = parse_response(ex.response);
    return {std::move(q), std::move(ex)};
}

std::string query_spec_to_json(const QuerySpec& q) {
    nlohmann::ordered_json doc = {{"main_positive", q.main_positive},
                                  {"helping_positives", q.helping_positives},
                                  {"canonicals", q.canonicals}};
    return doc.dump(2);
}

QuerySpec query_spec_from_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        QuerySpec q;
        q.main_positive = doc.at("main_positive").get<std::string>();
        q.helping_positives = doc.value("helping_positives", std::vector<std::string>{});
        q.canonicals = doc.at("canonicals").get<std::vector<std::string>>();
        return q;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed query JSON: ") + e.what());
    }
}

} // namespace lesplat
