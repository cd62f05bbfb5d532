#pragma once

// Loader for tests/data/replies.json: recorded-style LLM replies keyed by prompt context.

#include "lesplat/io.hpp"
#include "lesplat/query_gen.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace corpus {

struct Reply {
    lesplat::PromptContext context;
    std::string text;
};

struct Corpus {
    std::vector<Reply> valid;
    std::vector<std::string> out_of_range;
    std::vector<std::string> malformed;

    /// Hash-keyed fixtures for the valid replies, as stub mode reads them.
    lesplat::Fixtures fixtures() const {
        lesplat::Fixtures f;
        for (const auto& r : valid) {
            f.emplace(lesplat::prompt_hash(lesplat::build_prompt(r.context)), r.text);
        }
        return f;
    }
};

inline Corpus load() {
    const auto doc = nlohmann::json::parse(lesplat::read_text_file(LESPLAT_TEST_DATA_DIR "/replies.json"));
    Corpus c;
    for (const auto& v : doc.at("valid")) {
        const auto& ctx = v.at("context");
        Reply r;
        r.context.mode = ctx.at("mode") == "object" ? lesplat::PromptMode::Object : lesplat::PromptMode::Attention;
        r.context.object = ctx.value("object", "");
        r.context.road_type = ctx.value("road_type", "");
        r.context.weather = ctx.value("weather", "");
        r.context.time_of_day = ctx.value("time_of_day", "");
        r.text = v.at("reply").get<std::string>();
        c.valid.push_back(std::move(r));
    }
    c.out_of_range = doc.at("out_of_range").get<std::vector<std::string>>();
    c.malformed = doc.at("malformed").get<std::vector<std::string>>();
    return c;
}

} // namespace corpus
