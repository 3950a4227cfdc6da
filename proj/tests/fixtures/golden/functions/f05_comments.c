int masked(int flag)
{
    /* if (flag) { while (1) ; } */
    int r = flag; // for (;;) && ||
    // case 3: default:
    return r * 2;
}
