// SPDX-License-Identifier: Apache-2.0

#include "cfx/common.hpp"

#include <omp.h>

namespace cfx {

uint64_t hash_file(const std::string &path) {
    std::FILE *f = std::fopen(path.c_str(), "rb");
    if (f == nullptr)
        throw IoError("cannot open for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0)
        h = fnv1a64(buf, n, h);
    bool bad = std::ferror(f) != 0;
    std::fclose(f);
    if (bad)
        throw IoError("read failed while hashing: " + path);
    return h;
}

std::string to_hex(uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; i--, v >>= 4)
        s[i] = digits[v & 0xf];
    return s;
}

namespace {
int g_max_threads = 0; // 0 = library default
}

void set_max_threads(int n) {
    if (n > 0) {
        omp_set_num_threads(n);
        g_max_threads = n;
    }
}

int max_threads() { return g_max_threads > 0 ? g_max_threads : omp_get_max_threads(); }

} // namespace cfx
