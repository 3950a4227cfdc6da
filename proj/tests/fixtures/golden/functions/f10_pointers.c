struct node { struct node *next; int key; };

struct node *find_key(struct node *head, int key)
{
    struct node *p = head;
    while (p != NULL && p->key != key)
        p = p->next;
    return p;
}
