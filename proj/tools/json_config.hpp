#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

// CLI11 config formatter reading and writing JSON. Subcommands become nested
// objects that open and close a section; every value is stored as the string
// the user would have typed.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool defaultAlso, bool, std::string) const override {
        return to_json(app, defaultAlso).dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        std::vector<CLI::ConfigItem> items;
        collect(j, "", {}, items);
        return items;
    }

private:
    static nlohmann::json to_json(const CLI::App* app, bool defaultAlso) {
        nlohmann::json j = nlohmann::json::object();
        for (const CLI::Option* opt : app->get_options({})) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            const std::string name = opt->get_lnames()[0];
            if (name == "help" || name == "config") continue;
            if (opt->get_type_size() == 0) {
                if (opt->count() > 0 || defaultAlso) j[name] = opt->count() > 0;
            } else if (opt->count() == 1) {
                j[name] = opt->results().at(0);
            } else if (opt->count() > 1) {
                j[name] = opt->results();
            } else if (defaultAlso && !opt->get_default_str().empty()) {
                j[name] = opt->get_default_str();
            }
        }
        for (const CLI::App* sub : app->get_subcommands()) j[sub->get_name()] = to_json(sub, defaultAlso);
        return j;
    }

    static void collect(const nlohmann::json& j, const std::string& name, std::vector<std::string> parents,
                        std::vector<CLI::ConfigItem>& items) {
        if (j.is_object()) {
            if (!name.empty()) {
                parents.push_back(name);
                items.push_back({parents, "++", {}});
            }
            for (auto it = j.begin(); it != j.end(); ++it) collect(*it, it.key(), parents, items);
            if (!name.empty()) items.push_back({parents, "--", {}});
            return;
        }
        CLI::ConfigItem item;
        item.name = name;
        item.parents = parents;
        if (j.is_boolean()) {
            item.inputs = {j.get<bool>() ? "true" : "false"};
        } else if (j.is_string()) {
            item.inputs = {j.get<std::string>()};
        } else if (j.is_array()) {
            for (const auto& v : j) item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        } else {
            item.inputs = {j.dump()};
        }
        items.push_back(std::move(item));
    }
};
