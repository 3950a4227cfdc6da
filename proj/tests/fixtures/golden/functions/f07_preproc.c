int feature_level(int cfg)
{
#if defined(FAST) && FAST > 1
    cfg += 2;
#else
    cfg += 1;
#endif
#define TWICE(x) ((x) + \
                  (x))
    return TWICE(cfg);
}
