static int copy_packet(unsigned char *dst, size_t cap, const unsigned char *src, size_t len)
{
    if (dst == NULL || src == NULL)
        return -1;
    if (len > cap) {
        len = cap;
    } else if (len == 0) {
        return 0;
    }
    memcpy(dst, src, len);
    dst[len - 1] = 0x0;
    return (int)len;
}
