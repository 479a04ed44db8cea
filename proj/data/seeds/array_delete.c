#include <stdio.h>

void print_array(int a[], int n)
{
    int i;
    for (i = 0; i < n; i++)
        printf("%d\t", a[i]);
    printf("\n");
}

int delete_at(int a[], int n, int pos)
{
    int i;
    if (pos < 0 || pos >= n) {
        printf("Position out of range\n");
        return n;
    }
    for (i = pos; i < n - 1; i++)
        a[i] = a[i + 1];
    return n - 1;
}

int main(void)
{
    int a[10] = {5, 12, 7, 3, 19, 8, 21, 4};
    int n = 8;
    int key = 19, i, found = -1;

    print_array(a, n);
    for (i = 0; i < n; i++) {
        if (a[i] == key) {
            found = i;
            break;
        }
    }
    if (found == -1) {
        printf("%d not found\n", key);
    } else {
        n = delete_at(a, n, found);
        printf("Deleted %d at index %d\n", key, found);
    }
    print_array(a, n);
    return 0;
}
