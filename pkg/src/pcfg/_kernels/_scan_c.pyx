# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled scan kernel; contract identical to scan_py."""

KERNEL_NAME = "c"

cdef int _length(unsigned char op) nogil:
    if op == 0x01 or op == 0x0A:
        return 3
    if op == 0x02 or op == 0x03 or op == 0x04:
        return 5
    if op == 0x06:
        return 7
    return 1

cdef bint _is_cf(unsigned char op) nogil:
    return 0x02 <= op <= 0x08


def scan_block(bytes text, unsigned long long text_base, unsigned long long addr):
    cdef const unsigned char* buf = text
    cdef Py_ssize_t n = len(text)
    cdef Py_ssize_t off = addr - text_base
    cdef unsigned char op
    cdef int ln
    cdef unsigned long long a = 0
    cdef unsigned long long b = 0
    if off < 0:
        return text_base + n, -1, 0, 0
    with nogil:
        while off < n:
            op = buf[off]
            if op > 0x0A:
                off += 1
                continue
            ln = _length(op)
            if off + ln > n:
                off += 1
                continue
            if _is_cf(op):
                if op == 0x02 or op == 0x03 or op == 0x04 or op == 0x06:
                    a = (buf[off + 1] | (buf[off + 2] << 8)
                         | (buf[off + 3] << 16)
                         | (<unsigned long long> buf[off + 4] << 24))
                    if op == 0x06:
                        b = buf[off + 5] | (buf[off + 6] << 8)
                with gil:
                    return text_base + off + ln, <int> op, a, b
            off += ln
    return text_base + n, -1, 0, 0


def contains_cfi_scan(bytes text, unsigned long long text_base,
                      unsigned long long lo, unsigned long long hi):
    cdef const unsigned char* buf = text
    cdef Py_ssize_t n = len(text)
    cdef Py_ssize_t off = lo - text_base
    cdef Py_ssize_t limit = hi - text_base
    cdef unsigned char op
    cdef int ln
    cdef bint found = False
    if off < 0:
        return False
    with nogil:
        while off < limit and off < n:
            op = buf[off]
            if op > 0x0A:
                off += 1
                continue
            ln = _length(op)
            if off + ln > n:
                off += 1
                continue
            if _is_cf(op) and off + ln <= limit:
                found = True
                break
            off += ln
    return found
