#pragma once

// Minimal JSON Schema subset used by the shipped schemas: type, enum,
// required, properties, additionalProperties: false, items, minItems,
// maxItems, minimum, maximum, exclusiveMinimum, exclusiveMaximum, minLength
// and local "#/$defs/..." references.

#include "json.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace schema_check {

using nlohmann::json;

inline bool has_type(const json& v, const std::string& t)
{
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    return false;
}

inline void check(const json& root, const json& schema, const json& v, const std::string& path,
                  std::vector<std::string>& errors)
{
    if (schema.contains("$ref")) {
        const auto ref = schema["$ref"].get<std::string>();
        check(root, root.at(json::json_pointer(ref.substr(1))), v, path, errors);
        return;
    }
    if (schema.contains("type")) {
        const json& t = schema["type"];
        bool ok = false;
        if (t.is_array()) {
            for (const auto& x : t) {
                ok = ok || has_type(v, x.get<std::string>());
            }
        } else {
            ok = has_type(v, t.get<std::string>());
        }
        if (!ok) {
            errors.push_back(path + ": type " + t.dump());
            return;
        }
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& e : schema["enum"]) {
            found = found || e == v;
        }
        if (!found) {
            errors.push_back(path + ": not in enum");
        }
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (schema.contains("minimum") && x < schema["minimum"].get<double>()) errors.push_back(path + ": minimum");
        if (schema.contains("maximum") && x > schema["maximum"].get<double>()) errors.push_back(path + ": maximum");
        if (schema.contains("exclusiveMinimum") && x <= schema["exclusiveMinimum"].get<double>())
            errors.push_back(path + ": exclusiveMinimum");
        if (schema.contains("exclusiveMaximum") && x >= schema["exclusiveMaximum"].get<double>())
            errors.push_back(path + ": exclusiveMaximum");
    }
    if (v.is_string() && schema.contains("minLength") &&
        v.get<std::string>().size() < schema["minLength"].get<std::size_t>()) {
        errors.push_back(path + ": minLength");
    }
    if (v.is_array()) {
        if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>())
            errors.push_back(path + ": minItems");
        if (schema.contains("maxItems") && v.size() > schema["maxItems"].get<std::size_t>())
            errors.push_back(path + ": maxItems");
        if (schema.contains("items")) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                check(root, schema["items"], v[i], path + "/" + std::to_string(i), errors);
            }
        }
    }
    if (v.is_object()) {
        if (schema.contains("required")) {
            for (const auto& r : schema["required"]) {
                if (!v.contains(r.get<std::string>())) {
                    errors.push_back(path + "/" + r.get<std::string>() + ": required");
                }
            }
        }
        const json props = schema.value("properties", json::object());
        for (const auto& [key, value] : v.items()) {
            if (props.contains(key)) {
                check(root, props[key], value, path + "/" + key, errors);
            } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
                errors.push_back(path + "/" + key + ": not allowed");
            }
        }
    }
}

/// Empty when `doc` conforms.
inline std::vector<std::string> validate(const json& schema, const json& doc)
{
    std::vector<std::string> errors;
    check(schema, schema, doc, "", errors);
    return errors;
}

inline json load(const std::string& path)
{
    std::ifstream in(path);
    return json::parse(in);
}

} // namespace schema_check
