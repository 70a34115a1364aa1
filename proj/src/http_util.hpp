#pragma once

#include <string>
#include <utility>

#include "mhke/errors.hpp"

namespace mhke {

/// Splits a full URL into (scheme://host[:port], path). The base goes to
/// httplib::Client, the path to the request.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("URL missing scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace mhke
