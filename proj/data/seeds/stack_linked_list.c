#include <stdio.h>
#include <stdlib.h>

/* Stack implemented with a singly linked list. */

struct node {
    int value;
    struct node *next;
};

struct node *top = NULL;

void push(int value)
{
    struct node *n = malloc(sizeof(struct node));
    if (n == NULL) {
        printf("Stack overflow\n");
        return;
    }
    n->value = value;
    n->next = top;
    top = n;
}

int pop(void)
{
    struct node *old;
    int value;
    if (top == NULL) {
        printf("Stack underflow\n");
        return -1;
    }
    old = top;
    value = old->value;
    top = old->next;
    free(old);
    return value;
}

int peek(void)
{
    if (top == NULL)
        return -1;
    return top->value;
}

void display(void)
{
    struct node *p = top;
    printf("Stack:");
    while (p != NULL) {
        printf(" %d", p->value);
        p = p->next;
    }
    printf("\n");
}

int main(void)
{
    int i;
    for (i = 1; i <= 5; i++) {
        push(i * 10);
    }
    display();
    printf("Popped %d\n", pop());
    printf("Popped %d\n", pop());
    printf("Top is %d\n", peek());
    display();
    while (top != NULL) {
        pop();
    }
    return 0;
}
