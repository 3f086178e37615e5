#include "mokge/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "mokge/kg.hpp"

namespace mokge {

std::vector<Example> parse_dataset(std::istream& in) {
    std::vector<Example> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
        }
        if (!j.is_object())
            throw ParseError("expected a JSON object", lineno);
        for (const char* key : {"id", "input", "references"})
            if (!j.contains(key))
                throw ParseError(std::string("missing \"") + key + "\"", lineno);
        Example ex;
        try {
            ex.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            ex.input = j.at("input").get<std::string>();
            ex.references = j.at("references").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad field type: ") + e.what(), lineno);
        }
        if (ex.references.empty())
            throw ParseError("example '" + ex.id + "' has no references", lineno);
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Example> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open dataset: " + path.string());
    return parse_dataset(in);
}

void write_dataset(std::ostream& out, std::span<const Example> examples) {
    for (const auto& ex : examples) {
        nlohmann::json j;
        j["id"] = ex.id;
        j["input"] = ex.input;
        j["references"] = ex.references;
        out << j.dump() << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, std::span<const Example> examples) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write dataset: " + path.string());
    write_dataset(out, examples);
}

}  // namespace mokge
