#include "caesar/http.hpp"

#include <httplib.h>

#include "caesar/error.hpp"
#include "caesar/text.hpp"
#include "caesar/url.hpp"

namespace caesar::http {

std::string Response::header(const std::string& lower_name) const {
    auto it = headers.find(lower_name);
    return it == headers.end() ? std::string{} : it->second;
}

Response request(const std::string& method, const std::string& url, const Headers& headers,
                 const std::string& body, const std::string& content_type, double timeout_s) {
    auto parsed = parse_url(url);
    if (!parsed || !parsed->has_authority || (parsed->scheme != "http" && parsed->scheme != "https")) {
        throw Error(ErrorCode::InvalidArgument, "not an http(s) URL: " + url);
    }
    httplib::Client client(parsed->origin());
    auto secs = static_cast<time_t>(timeout_s);
    auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    client.set_follow_location(false);
    client.set_decompress(true);

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    std::string target = parsed->path_and_query();
    httplib::Result res;
    if (method == "GET") {
        res = client.Get(target, hdrs);
    } else if (method == "POST") {
        res = client.Post(target, hdrs, body, content_type);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unsupported HTTP method " + method);
    }
    if (!res) {
        throw Error(ErrorCode::Transport, "request to " + url + " failed: " + httplib::to_string(res.error()));
    }
    Response out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) out.headers[text::to_lower(k)] = v;
    return out;
}

}  // namespace caesar::http
