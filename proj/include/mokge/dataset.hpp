#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mokge {

/// One dataset item: an input text with one or more reference outputs.
struct Example {
    std::string id;
    std::string input;
    std::vector<std::string> references;

    bool operator==(const Example&) const = default;
};

/// JSONL, one {"id","input","references":[...]} object per line. Blank lines
/// are skipped; CRLF endings are accepted.
std::vector<Example> parse_dataset(std::istream& in);
std::vector<Example> load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, std::span<const Example> examples);
void save_dataset(const std::filesystem::path& path, std::span<const Example> examples);

}  // namespace mokge
