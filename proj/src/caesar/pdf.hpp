#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace caesar::pdf {

struct Document {
    std::vector<std::string> pages;  // extracted text per page, in page-tree order
    std::vector<std::string> uris;   // /URI link annotations, in object order
};

// Minimal text extractor: classic and object-stream objects, FlateDecode and
// ASCIIHexDecode filters, page-tree ordering, and the text-showing operators of
// content streams. Fonts with custom 2-byte encodings are not mapped.
// Throws Error{InvalidContent} for data that is not a PDF or yields no pages.
Document parse(std::string_view data);

// Page texts joined in order.
std::string extract_text(std::string_view data);

bool looks_like_pdf(std::string_view data);

// zlib inflate; returns what could be decoded from damaged input.
std::string inflate(std::string_view data);

}  // namespace caesar::pdf
