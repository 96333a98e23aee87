#pragma once

// Default live transport on cpp-httplib. Kept out of gateway.hpp so tests and
// library users that never go live do not pull the HTTP stack in.

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "acrlab/gateway.hpp"

namespace acrlab {

inline Transport make_httplib_transport() {
    return [](const ChatJob& job, const ProviderProfile& profile) -> TransportReply {
        if (profile.api_base.empty())
            return {0, "", "profile " + profile.model_id + " has no api_base"};
        const char* key = profile.auth_env.empty() ? nullptr : std::getenv(profile.auth_env.c_str());
        if (!key) return {0, "", "credential env var not set: " + profile.auth_env};

        json body;
        httplib::Headers headers;
        std::string path;
        if (profile.wire == WireFormat::anthropic) {
            path = "/v1/messages";
            headers = {{"x-api-key", key}, {"anthropic-version", "2023-06-01"}};
            std::string system;
            json messages = json::array();
            for (const auto& m : job.messages) {
                if (m.role == "system") {
                    system += (system.empty() ? "" : "\n") + m.text;
                    continue;
                }
                messages.push_back({{"role", m.role}, {"content", m.text}});
            }
            body = {{"model", job.model_id},
                    {"max_tokens", job.max_output_tokens},
                    {"temperature", job.temperature},
                    {"messages", messages}};
            if (!system.empty()) body["system"] = system;
        } else {
            path = "/v1/chat/completions";
            headers = {{"Authorization", std::string("Bearer ") + key}};
            json messages = json::array();
            for (const auto& m : job.messages)
                messages.push_back({{"role", m.role}, {"content", m.text}});
            body = {{"model", job.model_id},
                    {"max_tokens", job.max_output_tokens},
                    {"temperature", job.temperature},
                    {"messages", messages}};
        }

        httplib::Client client(profile.api_base);
        client.set_read_timeout(120, 0);
        const httplib::Result res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) return {0, "", httplib::to_string(res.error())};
        return {res->status, res->body, ""};
    };
}

} // namespace acrlab
