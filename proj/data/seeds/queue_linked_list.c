#include <stdio.h>
#include <stdlib.h>

struct node {
    int data;
    struct node *next;
};

struct node *front = NULL;
struct node *rear = NULL;

void enqueue(int data)
{
    struct node *temp = (struct node *)malloc(sizeof(struct node));
    temp->data = data;
    temp->next = NULL;
    if (rear == NULL) {
        front = temp;
        rear = temp;
    } else {
        rear->next = temp;
        rear = temp;
    }
}

int dequeue(void)
{
    struct node *temp;
    int data;
    if (front == NULL) {
        printf("Queue is empty\n");
        return -1;
    }
    temp = front;
    data = temp->data;
    front = front->next;
    if (front == NULL)
        rear = NULL;
    free(temp);
    return data;
}

int size(void)
{
    int count = 0;
    struct node *p;
    for (p = front; p != NULL; p = p->next)
        count = count + 1;
    return count;
}

void print_queue(void)
{
    struct node *p = front;
    if (p == NULL) {
        printf("Queue is empty\n");
        return;
    }
    while (p != NULL) {
        printf("%d ", p->data);
        p = p->next;
    }
    printf("\n");
}

int main()
{
    int i, n = 6;
    for (i = 0; i < n; i++)
        enqueue(i + 1);
    print_queue();
    printf("Dequeued: %d\n", dequeue());
    printf("Dequeued: %d\n", dequeue());
    printf("Size: %d\n", size());
    print_queue();
    return 0;
}
