#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace caesar::http {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct Response {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;  // lowercased names

    std::string header(const std::string& lower_name) const;
};

// One request, no redirect following. Throws Error{Transport} when no HTTP
// response was received. Compressed bodies are decoded.
Response request(const std::string& method, const std::string& url, const Headers& headers,
                 const std::string& body, const std::string& content_type, double timeout_s);

}  // namespace caesar::http
