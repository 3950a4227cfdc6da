const char *name_of(int kind)
{
    switch (kind) {
    case 0:
        return "zero";
    case 1:
        return "one";
    case 2:
        return "two";
    default:
        return "many";
    }
}
