#include "fsap/templates.hpp"

#include "fsap/error.hpp"
#include "fsap/util.hpp"

namespace fsap {

namespace {

bool placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls on_text(literal) and on_placeholder(name) in order over the body.
template <typename Text, typename Slot>
void scan(std::string_view body, Text&& on_text, Slot&& on_placeholder) {
    std::size_t i = 0, literal_start = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            std::size_t j = i + 1;
            while (j < body.size() && placeholder_char(body[j])) ++j;
            if (j < body.size() && body[j] == '}' && j > i + 1) {
                on_text(body.substr(literal_start, i - literal_start));
                on_placeholder(body.substr(i + 1, j - i - 1));
                i = literal_start = j + 1;
                continue;
            }
        }
        ++i;
    }
    on_text(body.substr(literal_start));
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string name, std::string_view text) {
    auto newline = text.find('\n');
    auto header = text.substr(0, newline);
    constexpr std::string_view prefix = "version: ";
    if (!header.starts_with(prefix) || header.size() == prefix.size())
        throw ParseError(name, 1, "first line must be 'version: <tag>'");
    PromptTemplate t;
    t.name = std::move(name);
    t.version = std::string(header.substr(prefix.size()));
    if (newline != std::string_view::npos) t.body = std::string(text.substr(newline + 1));
    if (t.body.ends_with('\n')) t.body.pop_back();
    return t;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    scan(
        body, [&](std::string_view lit) { out.append(lit); },
        [&](std::string_view slot) {
            auto it = values.find(std::string(slot));
            if (it == values.end())
                throw Error("template " + name + ": no value for {" + std::string(slot) + "}");
            out += it->second;
        });
    return out;
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> out;
    scan(body, [](std::string_view) {}, [&](std::string_view slot) { out.emplace_back(slot); });
    return out;
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& root, const std::string& version) {
    TemplateLibrary lib;
    lib.version_ = version;
    for (auto name : kNames) {
        auto path = root / version / (std::string(name) + ".txt");
        if (!std::filesystem::exists(path)) throw ConfigError("missing template " + path.string());
        auto t = PromptTemplate::parse(std::string(name), read_file(path));
        if (t.version != version)
            throw ConfigError("template " + path.string() + " declares version " + t.version +
                              ", expected " + version);
        lib.templates_.emplace(std::string(name), std::move(t));
    }
    return lib;
}

const PromptTemplate& TemplateLibrary::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw Error("unknown template " + std::string(name));
    return it->second;
}

}  // namespace fsap
